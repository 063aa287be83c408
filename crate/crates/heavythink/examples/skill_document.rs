//! Emit the readable skill document and lint it, then show how the linter
//! reacts to a mutilated copy.
//!
//! ```bash
//! cargo run --example skill_document
//! ```

use heavythink::skill::{emit_skill, validate_skill, SECTION_DELIBERATION};

fn main() {
    let skill = emit_skill(8, 4, &[]);
    println!("{skill}\n");
    println!("validation findings on the emitted document: {:?}\n", validate_skill(&skill));

    let broken = skill
        .replace(SECTION_DELIBERATION, "## Improvised Section")
        .replace("K = 8", "a bunch of");
    println!("findings on a mutilated copy:");
    for finding in validate_skill(&broken) {
        println!("  - {finding}");
    }
}
