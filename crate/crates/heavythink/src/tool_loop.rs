//! Tool-interleaved trajectory generation.
//!
//! [`run_tool_interleaved`] drives a generate/execute loop: whenever the
//! model finishes with a tool call, the call is executed, the result is fed
//! back as a tool-role message, and generation resumes — up to `max_rounds`
//! interaction rounds (default 50). Executor failures are never loop errors;
//! they return as `ok=false` tool results so the model can recover from the
//! feedback.
//!
//! Tool calls travel inside the generated text as
//! `<tool_call>{"name": ..., "arguments": ...}</tool_call>` segments, the
//! convention the HTTP provider also folds structured tool calls into.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{
    complete, CompletionRequest, FinishReason, Message, Provider, ProviderError, RetryPolicy,
    SamplingParams,
};
use crate::trajectory::{Query, Trajectory, TrajectoryError};

pub const TOOL_CALL_OPEN: &str = "<tool_call>";
pub const TOOL_CALL_CLOSE: &str = "</tool_call>";

/// Default cap on captured output per tool call: 64 KiB.
pub const DEFAULT_OUTPUT_CAP: usize = 64 * 1024;

pub const OUTPUT_TRUNCATED_MARKER: &str = "\n…[output truncated]";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool_name: String,
    pub arguments: String,
    pub round: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolResult {
    pub output: String,
    pub ok: bool,
}

impl ToolResult {
    pub fn ok(output: impl Into<String>) -> Self {
        Self { output: output.into(), ok: true }
    }

    pub fn err(output: impl Into<String>) -> Self {
        Self { output: output.into(), ok: false }
    }
}

/// One executed (call, result) pair in a trajectory's tool transcript.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolExchange {
    pub call: ToolCall,
    pub result: ToolResult,
}

/// Behavioral contract for tool execution. Implementations must enforce
/// their own per-call timeout and report failures as `ok=false` results.
#[async_trait]
pub trait ToolExecutor: Send + Sync {
    fn name(&self) -> &str;
    async fn execute(&self, call: &ToolCall) -> ToolResult;
}

#[derive(Clone)]
pub struct ToolLoopConfig {
    /// Hard cap on interaction rounds with the executor.
    pub max_rounds: u32,
    pub per_call_timeout: Duration,
    pub executor: Arc<dyn ToolExecutor>,
}

impl ToolLoopConfig {
    /// Default round cap of 50 with the given executor.
    pub fn new(executor: Arc<dyn ToolExecutor>) -> Self {
        Self { max_rounds: 50, per_call_timeout: Duration::from_secs(30), executor }
    }

    pub fn with_max_rounds(mut self, max_rounds: u32) -> Self {
        self.max_rounds = max_rounds;
        self
    }
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("command template must contain the {{input}} placeholder")]
    MissingPlaceholder,
}

/// Parse the last `<tool_call>{...}</tool_call>` segment out of generated
/// text. The payload is JSON with `name` and `arguments`; a non-string
/// `arguments` value is re-serialized verbatim.
pub fn parse_tool_call(text: &str, round: u32) -> Option<ToolCall> {
    let open = text.rfind(TOOL_CALL_OPEN)?;
    let after = &text[open + TOOL_CALL_OPEN.len()..];
    let close = after.find(TOOL_CALL_CLOSE)?;
    let payload: serde_json::Value = serde_json::from_str(after[..close].trim()).ok()?;
    let tool_name = payload.get("name")?.as_str()?.to_string();
    let arguments = match payload.get("arguments") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    };
    Some(ToolCall { tool_name, arguments, round })
}

fn tool_prompt(query: &Query, tool_name: &str) -> Vec<Message> {
    vec![Message::user(format!(
        "{}\n\nYou may use the tool `{}` by emitting \
         <tool_call>{{\"name\": \"{}\", \"arguments\": \"...\"}}</tool_call>; \
         its output will be returned to you.\n\n{}",
        query.text,
        tool_name,
        tool_name,
        query.domain_tag.format_rule()
    ))]
}

/// Generate one trajectory with interleaved tool execution.
///
/// The loop terminates when the model stops on its own or when `max_rounds`
/// tool executions have happened, in which case the trajectory is flagged
/// with the length-truncation finish reason. The returned trajectory is
/// decomposed from the final generation's text.
pub async fn run_tool_interleaved(
    query: &Query,
    slot: usize,
    thinker: &dyn Provider,
    config: &ToolLoopConfig,
    sampling: &SamplingParams,
    retry: &RetryPolicy,
) -> Result<Trajectory, TrajectoryError> {
    let mut messages = tool_prompt(query, config.executor.name());
    let mut transcript: Vec<ToolExchange> = Vec::new();
    let mut completion_tokens = 0u64;

    let (final_text, final_finish) = loop {
        let request = CompletionRequest::new(messages.clone(), sampling.clone(), 1);
        let result = complete(thinker, &request, retry).await.map_err(|err: ProviderError| {
            TrajectoryError::AllGenerationsFailed { attempted: 1, last_error: err.to_string() }
        })?;
        completion_tokens += result.usage.completion_tokens;
        let text = result.texts[0].clone();
        let finish = result.finish_reasons[0];
        messages.push(Message::assistant(text.clone()));

        if finish != FinishReason::ToolCall {
            break (text, finish);
        }

        let round = transcript.len() as u32 + 1;
        let call = parse_tool_call(&text, round).unwrap_or_else(|| ToolCall {
            tool_name: config.executor.name().to_string(),
            arguments: String::new(),
            round,
        });
        let result = if call.arguments.is_empty() && !text.contains(TOOL_CALL_OPEN) {
            ToolResult::err("no parsable <tool_call> payload found")
        } else {
            config.executor.execute(&call).await
        };
        messages.push(Message::tool(result.output.clone()));
        transcript.push(ToolExchange { call, result });

        if transcript.len() as u32 >= config.max_rounds {
            break (text, FinishReason::Length);
        }
    };

    let mut trajectory = Trajectory::from_completion(
        format!("t{slot:03}"),
        query,
        &final_text,
        final_finish,
        completion_tokens,
        sampling.clone(),
    );
    trajectory.tool_transcript = transcript;
    Ok(trajectory)
}

// ---------------------------------------------------------------------------
// Built-in arithmetic executor
// ---------------------------------------------------------------------------

/// Exact big-integer/rational arithmetic over `+ - * / **` and parentheses.
/// Anything outside that grammar is rejected, which makes it a safe stand-in
/// for a code interpreter in tests and offline runs.
pub struct ArithmeticExecutor;

pub fn builtin_arithmetic_executor() -> Arc<dyn ToolExecutor> {
    Arc::new(ArithmeticExecutor)
}

#[async_trait]
impl ToolExecutor for ArithmeticExecutor {
    fn name(&self) -> &str {
        "calculator"
    }

    async fn execute(&self, call: &ToolCall) -> ToolResult {
        match eval_arithmetic(&call.arguments) {
            Ok(value) => ToolResult::ok(format_rational(&value)),
            Err(err) => ToolResult::err(err.to_string()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArithmeticError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("exponent out of range")]
    ExponentOutOfRange,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Slash,
    Power,
    LParen,
    RParen,
}

fn tokenize(input: &str) -> Result<Vec<Token>, ArithmeticError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = input.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            c if c.is_whitespace() => i += 1,
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let literal: String = chars[start..i].iter().collect();
                let value = literal
                    .parse::<BigInt>()
                    .map_err(|e| ArithmeticError::Parse(format!("bad integer: {e}")))?;
                tokens.push(Token::Int(value));
            }
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' | '−' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' | '×' => {
                if ch == '*' && chars.get(i + 1) == Some(&'*') {
                    tokens.push(Token::Power);
                    i += 2;
                } else {
                    tokens.push(Token::Star);
                    i += 1;
                }
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            other => {
                return Err(ArithmeticError::Parse(format!("unexpected character {other:?}")));
            }
        }
    }
    if tokens.is_empty() {
        return Err(ArithmeticError::Parse("empty expression".into()));
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).cloned();
        if token.is_some() {
            self.pos += 1;
        }
        token
    }

    fn expr(&mut self) -> Result<BigRational, ArithmeticError> {
        let mut value = self.term()?;
        while let Some(op) = self.peek().cloned() {
            match op {
                Token::Plus => {
                    self.advance();
                    value += self.term()?;
                }
                Token::Minus => {
                    self.advance();
                    value -= self.term()?;
                }
                _ => break,
            }
        }
        Ok(value)
    }

    fn term(&mut self) -> Result<BigRational, ArithmeticError> {
        let mut value = self.unary()?;
        while let Some(op) = self.peek().cloned() {
            match op {
                Token::Star => {
                    self.advance();
                    value *= self.unary()?;
                }
                Token::Slash => {
                    self.advance();
                    let divisor = self.unary()?;
                    if divisor.is_zero() {
                        return Err(ArithmeticError::DivisionByZero);
                    }
                    value /= divisor;
                }
                _ => break,
            }
        }
        Ok(value)
    }

    fn unary(&mut self) -> Result<BigRational, ArithmeticError> {
        let mut negate = false;
        while let Some(op) = self.peek() {
            match op {
                Token::Minus => {
                    negate = !negate;
                    self.advance();
                }
                Token::Plus => {
                    self.advance();
                }
                _ => break,
            }
        }
        let value = self.power()?;
        Ok(if negate { -value } else { value })
    }

    fn power(&mut self) -> Result<BigRational, ArithmeticError> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Power) {
            self.advance();
            // Right-associative; the exponent may itself carry a unary sign.
            let exponent = self.unary()?;
            return pow_rational(&base, &exponent);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<BigRational, ArithmeticError> {
        match self.advance() {
            Some(Token::Int(value)) => Ok(BigRational::from_integer(value)),
            Some(Token::LParen) => {
                let value = self.expr()?;
                match self.advance() {
                    Some(Token::RParen) => Ok(value),
                    _ => Err(ArithmeticError::Parse("missing closing parenthesis".into())),
                }
            }
            other => Err(ArithmeticError::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

fn pow_rational(base: &BigRational, exponent: &BigRational) -> Result<BigRational, ArithmeticError> {
    if !exponent.is_integer() {
        return Err(ArithmeticError::Parse("exponent must be an integer".into()));
    }
    let exp = exponent
        .to_integer()
        .to_i64()
        .ok_or(ArithmeticError::ExponentOutOfRange)?;
    if exp.unsigned_abs() > 100_000 {
        return Err(ArithmeticError::ExponentOutOfRange);
    }
    if exp == 0 {
        return Ok(BigRational::one());
    }
    if base.is_zero() && exp < 0 {
        return Err(ArithmeticError::DivisionByZero);
    }
    let positive = base.pow(exp.unsigned_abs() as i32);
    Ok(if exp < 0 { positive.recip() } else { positive })
}

/// Evaluate an arithmetic expression to an exact rational.
pub fn eval_arithmetic(input: &str) -> Result<BigRational, ArithmeticError> {
    let tokens = tokenize(input)?;
    let mut parser = Parser { tokens, pos: 0 };
    let value = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(ArithmeticError::Parse("trailing input".into()));
    }
    Ok(value)
}

/// Render an exact rational: plain integer when the denominator is 1,
/// otherwise `numerator/denominator` in lowest terms.
pub fn format_rational(value: &BigRational) -> String {
    if value.is_integer() {
        value.to_integer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

// ---------------------------------------------------------------------------
// External command executor
// ---------------------------------------------------------------------------

/// Runs a configured shell command for each call: arguments are written to a
/// temp file, `{input}` in the template is replaced with its path, and the
/// combined stdout/stderr is captured (capped) with a kill on timeout.
pub struct ExternalCommandExecutor {
    command_template: String,
    workdir: PathBuf,
    per_call_timeout: Duration,
    output_cap: usize,
    tool_name: String,
}

pub fn external_command_executor(
    command_template: impl Into<String>,
    workdir: impl AsRef<Path>,
    per_call_timeout: Duration,
) -> Result<Arc<dyn ToolExecutor>, ToolError> {
    Ok(Arc::new(ExternalCommandExecutor::new(command_template, workdir, per_call_timeout)?))
}

impl ExternalCommandExecutor {
    pub fn new(
        command_template: impl Into<String>,
        workdir: impl AsRef<Path>,
        per_call_timeout: Duration,
    ) -> Result<Self, ToolError> {
        let command_template = command_template.into();
        if !command_template.contains("{input}") {
            return Err(ToolError::MissingPlaceholder);
        }
        Ok(Self {
            command_template,
            workdir: workdir.as_ref().to_path_buf(),
            per_call_timeout,
            output_cap: DEFAULT_OUTPUT_CAP,
            tool_name: "interpreter".to_string(),
        })
    }

    pub fn with_output_cap(mut self, cap: usize) -> Self {
        self.output_cap = cap;
        self
    }

    fn cap_output(&self, mut output: String) -> (String, bool) {
        if output.len() <= self.output_cap {
            return (output, false);
        }
        let mut cut = self.output_cap;
        while !output.is_char_boundary(cut) {
            cut -= 1;
        }
        output.truncate(cut);
        output.push_str(OUTPUT_TRUNCATED_MARKER);
        (output, true)
    }
}

#[async_trait]
impl ToolExecutor for ExternalCommandExecutor {
    fn name(&self) -> &str {
        &self.tool_name
    }

    async fn execute(&self, call: &ToolCall) -> ToolResult {
        let input_file = match tempfile::Builder::new()
            .prefix("tool-input-")
            .tempfile_in(&self.workdir)
        {
            Ok(file) => file,
            Err(err) => return ToolResult::err(format!("spawn failure: {err}")),
        };
        if let Err(err) = std::fs::write(input_file.path(), &call.arguments) {
            return ToolResult::err(format!("spawn failure: {err}"));
        }
        let command = self
            .command_template
            .replace("{input}", &input_file.path().display().to_string());

        let mut process = tokio::process::Command::new("/bin/sh");
        process
            .arg("-c")
            .arg(&command)
            .current_dir(&self.workdir)
            .stdin(std::process::Stdio::null())
            .stdout(std::process::Stdio::piped())
            .stderr(std::process::Stdio::piped())
            .kill_on_drop(true);

        let child = match process.spawn() {
            Ok(child) => child,
            Err(err) => return ToolResult::err(format!("spawn failure: {err}")),
        };

        match tokio::time::timeout(self.per_call_timeout, child.wait_with_output()).await {
            Err(_elapsed) => ToolResult::err(format!(
                "timed out after {:.1}s",
                self.per_call_timeout.as_secs_f64()
            )),
            Ok(Err(err)) => ToolResult::err(format!("spawn failure: {err}")),
            Ok(Ok(output)) => {
                let mut combined = String::from_utf8_lossy(&output.stdout).into_owned();
                combined.push_str(&String::from_utf8_lossy(&output.stderr));
                let (combined, _truncated) = self.cap_output(combined);
                if output.status.success() {
                    ToolResult::ok(combined)
                } else {
                    ToolResult { output: combined, ok: false }
                }
            }
        }
    }
}
