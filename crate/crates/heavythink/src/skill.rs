//! Readable skill document emission and linting.
//!
//! The skill is a plain-text document with four fixed Markdown sections —
//! activation conditions, parallel reasoning protocol, deliberation prompt,
//! output constraints — that any skill-loading agentic harness can read to
//! self-orchestrate two-phase heavy thinking without code changes.
//! Validation is lexical: section headings, directive phrases, and the
//! explicit K declaration must all be present.

use serde::Serialize;

use crate::cache::directives;
use crate::trajectory::DomainTag;

pub const SECTION_ACTIVATION: &str = "## Activation Conditions";
pub const SECTION_PROTOCOL: &str = "## Parallel Reasoning Protocol";
pub const SECTION_DELIBERATION: &str = "## Deliberation Prompt";
pub const SECTION_OUTPUT: &str = "## Output Constraints";

pub const ALL_SECTIONS: [(&str, &str); 4] = [
    ("activation", SECTION_ACTIVATION),
    ("protocol", SECTION_PROTOCOL),
    ("deliberation_prompt", SECTION_DELIBERATION),
    ("output_constraints", SECTION_OUTPUT),
];

#[derive(Debug, Clone, Serialize)]
pub struct SkillMetadata {
    pub version: u32,
    pub default_k: u32,
    pub default_k1: u32,
}

/// The four-component skill document, materialized before rendering.
#[derive(Debug, Clone, Serialize)]
pub struct SkillDocument {
    pub activation: String,
    pub protocol: String,
    pub deliberation_prompt: String,
    pub output_constraints: String,
    pub metadata: SkillMetadata,
}

impl SkillDocument {
    pub fn compose(default_k: u32, default_k1: u32, domains: &[DomainTag]) -> Self {
        let k = default_k.max(1);
        let k1 = default_k1.max(1);

        let activation = "\
Activate this skill when the task involves complex reasoning: competition \
mathematics, multi-step derivations, non-trivial code, or questions where a \
single attempt is likely to go wrong. Remain dormant for simple factual \
queries or casual conversation, so the extra inference cost is only paid \
when the task complexity justifies it."
            .to_string();

        let protocol = format!(
            "Spawn K = {k} independent reasoning agents in parallel. Every agent \
receives the identical problem statement and solves it from scratch; no agent \
may see another agent's output (independence requirement). Encourage diversity \
by letting agents take different problem-solving strategies, for example an \
algebraic route versus a geometric one. Collect the K answer sections into a \
serialized memory cache and shuffle their order before deliberation so no \
position is privileged."
        );

        let deliberation_prompt = format!(
            "Produce K1 = {k1} deliberation passes over the serialized cache. In each pass:\n\
1. Classify the query type to choose the appropriate depth of analysis.\n\
2. Critically evaluate each trajectory on its own merits; do not simply follow the majority.\n\
3. If every trajectory is judged wrong, re-derive the answer from scratch.\n\
4. Maintain language and format consistency with the original query.\n\
Do not produce a superficial concatenation of agent outputs; synthesize them \
into a single resolution."
        );

        let mut output_constraints = String::from(
            "The final response must contain only the answer, never the meta-analysis.\n",
        );
        let listed: &[DomainTag] = if domains.is_empty() {
            &[DomainTag::Math, DomainTag::Code, DomainTag::MultipleChoice, DomainTag::General]
        } else {
            domains
        };
        for domain in listed {
            let label = match domain {
                DomainTag::Math => "mathematics",
                DomainTag::Code => "code",
                DomainTag::MultipleChoice => "multiple choice",
                DomainTag::General => "general",
            };
            output_constraints.push_str(&format!("- {label}: {}\n", domain.format_rule()));
        }

        Self {
            activation,
            protocol,
            deliberation_prompt,
            output_constraints,
            metadata: SkillMetadata { version: 1, default_k: k, default_k1: k1 },
        }
    }

    pub fn render(&self) -> String {
        format!(
            "# Heavy Thinking Skill\n\n\
Version: {}\nDefaults: K = {}, K1 = {}\n\n\
{SECTION_ACTIVATION}\n\n{}\n\n\
{SECTION_PROTOCOL}\n\n{}\n\n\
{SECTION_DELIBERATION}\n\n{}\n\n\
{SECTION_OUTPUT}\n\n{}",
            self.metadata.version,
            self.metadata.default_k,
            self.metadata.default_k1,
            self.activation,
            self.protocol,
            self.deliberation_prompt,
            self.output_constraints.trim_end()
        )
    }
}

/// Emit the skill document as plain text.
pub fn emit_skill(default_k: u32, default_k1: u32, domains: &[DomainTag]) -> String {
    SkillDocument::compose(default_k, default_k1, domains).render()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkillFinding {
    MissingSection { section: String },
    MissingDirective { directive: String },
    MissingKDeclaration,
}

impl std::fmt::Display for SkillFinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkillFinding::MissingSection { section } => write!(f, "section absent: {section}"),
            SkillFinding::MissingDirective { directive } => {
                write!(f, "directive absent: {directive}")
            }
            SkillFinding::MissingKDeclaration => {
                write!(f, "protocol does not state K explicitly")
            }
        }
    }
}

/// Lint a skill document. Empty findings means conformant.
///
/// Directive checks run only when the deliberation section exists, and the
/// K-declaration check only when the protocol section exists, so a missing
/// section yields one finding rather than a cascade.
pub fn validate_skill(text: &str) -> Vec<SkillFinding> {
    let mut findings = Vec::new();
    let mut have = std::collections::BTreeMap::new();
    for (name, heading) in ALL_SECTIONS {
        let present = text.contains(heading);
        have.insert(name, present);
        if !present {
            findings.push(SkillFinding::MissingSection { section: name.to_string() });
        }
    }
    if have["deliberation_prompt"] {
        for (name, phrase) in directives::ALL {
            if !directives::present(text, phrase) {
                findings.push(SkillFinding::MissingDirective { directive: name.to_string() });
            }
        }
    }
    if have["protocol"] && !declares_k(text) {
        findings.push(SkillFinding::MissingKDeclaration);
    }
    findings
}

/// Whether the text contains an explicit `K = <number>` declaration.
fn declares_k(text: &str) -> bool {
    let bytes = text.as_bytes();
    let mut i = 0;
    while let Some(found) = text[i..].find('K') {
        let at = i + found;
        if at > 0 && bytes[at - 1].is_ascii_alphanumeric() {
            i = at + 1;
            continue;
        }
        let mut j = at + 1;
        while j < bytes.len() && bytes[j] == b' ' {
            j += 1;
        }
        if j < bytes.len() && bytes[j] == b'=' {
            j += 1;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                return true;
            }
        }
        i = at + 1;
    }
    false
}
