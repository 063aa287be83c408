use heavythink::orchestrator::cli_main;

// current_thread keeps scripted-mock runs fully deterministic; the pipeline
// is IO-bound, so HTTP endpoints lose nothing.
#[tokio::main(flavor = "current_thread")]
async fn main() {
    let code = cli_main(std::env::args_os()).await;
    std::process::exit(code);
}
