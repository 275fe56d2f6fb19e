//! Program synthesis and repair around a pluggable text generator, with a
//! deterministic fallback synthesizer and structured edits so the whole
//! loop runs without any model.

mod diff;
mod edit;
mod fallback;
mod prompt;

pub use diff::{diff_programs, AstDiff, DiffKind, DiffOp};
pub use edit::{apply_structured_edit, EditError, EditOp};
pub use fallback::{fallback_synthesize, FALLBACK_SIGMA, SPEAK_WINDOW};
pub use prompt::{PromptBundle, REPAIR_TEMPLATE, SYNTHESIZE_TEMPLATE};

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DemoToken;
use crate::dsl::{parse, print, ApiRegistry, BehaviorProgram};
use crate::fsm::compile;
use crate::grounding::{render, GroundedTranscript};

/// Total generation attempts per synthesis or repair call.
pub const DEFAULT_ATTEMPTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message}")]
pub struct ClientError {
    pub message: String,
}

/// A text generator: a hosted model, or a scripted stand-in for tests.
pub trait GenClient: Send + Sync {
    fn generate(&self, prompt: &str, seed: u64) -> Result<String, ClientError>;
}

/// Replays canned responses in order, repeating the last one when exhausted.
pub struct ScriptedClient {
    responses: Vec<String>,
    next: AtomicUsize,
}

impl ScriptedClient {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedClient { responses: responses.into_iter().map(Into::into).collect(), next: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl GenClient for ScriptedClient {
    fn generate(&self, _prompt: &str, _seed: u64) -> Result<String, ClientError> {
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        self.responses
            .get(i)
            .or(self.responses.last())
            .cloned()
            .ok_or_else(|| ClientError { message: "scripted client has no responses".into() })
    }
}

/// Returns the program embedded in a repair prompt unchanged.
pub struct EchoClient;

impl GenClient for EchoClient {
    fn generate(&self, prompt: &str, _seed: u64) -> Result<String, ClientError> {
        let start = prompt.find("<program>\n").map(|i| i + "<program>\n".len());
        let end = prompt.find("\n</program>");
        match (start, end) {
            (Some(s), Some(e)) if s <= e => Ok(prompt[s..e].to_string()),
            _ => Err(ClientError { message: "prompt carries no program".into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Flow,
    Execution,
}

impl FeedbackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackKind::Flow => "flow",
            FeedbackKind::Execution => "execution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
}

/// What the teacher said and pointed at while reviewing a flow or a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSession {
    pub kind: FeedbackKind,
    /// Node ids (`s3`) or edge ids (`s3->s4`) selected in the flow view.
    #[serde(default)]
    pub annotated: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_id: Option<String>,
    #[serde(default)]
    pub pauses: Vec<u64>,
    #[serde(default)]
    pub marks: Vec<Mark>,
    #[serde(default)]
    pub text: String,
    /// Tick at which the text was entered; defaults to the first pause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_tick: Option<u64>,
}

impl FeedbackSession {
    pub fn flow(annotated: &[&str], text: &str) -> Self {
        FeedbackSession {
            kind: FeedbackKind::Flow,
            annotated: annotated.iter().map(|s| s.to_string()).collect(),
            trace_id: None,
            pauses: vec![],
            marks: vec![],
            text: text.into(),
            text_tick: None,
        }
    }

    /// Typed text split into word tokens stamped with its entry time.
    pub fn tokens(&self, dt: f64) -> Vec<DemoToken> {
        let tick = self.text_tick.or(self.pauses.first().copied()).unwrap_or(0);
        self.text.split_whitespace().map(|w| DemoToken { t: tick as f64 * dt, text: w.to_string() }).collect()
    }

    /// The teacher explicitly approved the program as is.
    pub fn approves(&self) -> bool {
        let t = self.text.to_lowercase();
        ["no modifications are needed", "no changes are needed", "no changes needed"].iter().any(|p| t.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub prompt: String,
    pub response: String,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub operation: String,
    pub template: String,
    pub seed: u64,
    pub attempts: Vec<Attempt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<AstDiff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no demonstrations given")]
    NoDemonstrations,
    #[error("no valid program after {} attempts", provenance.attempts.len())]
    Exhausted { provenance: Provenance },
    #[error("generation failed: {message}")]
    Client { message: String, provenance: Provenance },
    #[error("ambiguous branch: no condition hint")]
    AmbiguousBranch,
    #[error("demonstrations come from different scenarios")]
    MixedScenarios,
    #[error("bad condition hint {expr:?}: {message}")]
    BadHint { expr: String, message: String },
    #[error("fallback produced an invalid program: {0}")]
    Invalid(String),
}

impl SynthError {
    pub fn provenance(&self) -> Option<&Provenance> {
        match self {
            SynthError::Exhausted { provenance } | SynthError::Client { provenance, .. } => Some(provenance),
            _ => None,
        }
    }
}

/// Drops Markdown code fences a model may wrap its answer in.
pub fn extract_program_text(response: &str) -> String {
    let t = response.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map(|(_, b)| b).unwrap_or("");
        let body = body.trim_end();
        let body = body.strip_suffix("```").unwrap_or(body);
        return body.trim_end().to_string() + "\n";
    }
    t.to_string() + "\n"
}

/// Parse and compile; the only gate a generated program must pass.
pub fn validate(text: &str, reg: &ApiRegistry) -> Result<BehaviorProgram, String> {
    let p = parse(text, reg).map_err(|e| e.to_string())?;
    compile(&p);
    Ok(p)
}

fn generate_validated(
    mut bundle: PromptBundle,
    reg: &ApiRegistry,
    client: &dyn GenClient,
    attempts: usize,
    seed: u64,
    operation: &str,
) -> Result<(BehaviorProgram, Provenance), SynthError> {
    let mut prov = Provenance {
        operation: operation.into(),
        template: bundle.template_id.clone(),
        seed,
        attempts: Vec::new(),
        diff: None,
        note: None,
    };
    for i in 0..attempts.max(1) {
        let prompt = bundle.render();
        let response = match client.generate(&prompt, seed.wrapping_add(i as u64)) {
            Ok(r) => r,
            Err(e) => {
                prov.attempts.push(Attempt { prompt, response: String::new(), diagnostic: Some(e.message.clone()) });
                return Err(SynthError::Client { message: e.message, provenance: prov });
            }
        };
        match validate(&extract_program_text(&response), reg) {
            Ok(p) => {
                prov.attempts.push(Attempt { prompt, response, diagnostic: None });
                return Ok((p, prov));
            }
            Err(d) => {
                bundle.diagnostics.push(format!("attempt {}: {d}", i + 1));
                prov.attempts.push(Attempt { prompt, response, diagnostic: Some(d) });
            }
        }
    }
    Err(SynthError::Exhausted { provenance: prov })
}

pub fn synthesize(
    transcripts: &[GroundedTranscript],
    reg: &ApiRegistry,
    client: &dyn GenClient,
    attempts: usize,
    seed: u64,
) -> Result<(BehaviorProgram, Provenance), SynthError> {
    if transcripts.is_empty() {
        return Err(SynthError::NoDemonstrations);
    }
    let bundle = PromptBundle::synthesis(reg, transcripts.iter().map(render).collect());
    generate_validated(bundle, reg, client, attempts, seed, "synthesize")
}

/// Everything a repair call sees besides the registry and client.
pub struct RepairInput<'a> {
    pub program: &'a BehaviorProgram,
    pub feedback: &'a FeedbackSession,
    pub grounded_feedback: &'a GroundedTranscript,
    /// Original demonstration transcripts; always sent along.
    pub demos: &'a [GroundedTranscript],
}

pub fn repair_bundle(input: &RepairInput, reg: &ApiRegistry) -> PromptBundle {
    PromptBundle::repair(
        reg,
        input.demos.iter().map(render).collect(),
        print(input.program),
        render(input.grounded_feedback),
        input.feedback.annotated.clone(),
    )
}

pub fn repair(
    input: &RepairInput,
    reg: &ApiRegistry,
    client: &dyn GenClient,
    attempts: usize,
    seed: u64,
) -> Result<(BehaviorProgram, Provenance), SynthError> {
    let bundle = repair_bundle(input, reg);
    if input.feedback.approves() {
        let prov = Provenance {
            operation: "repair".into(),
            template: bundle.template_id.clone(),
            seed,
            attempts: vec![],
            diff: Some(AstDiff::default()),
            note: Some("feedback approves the program; no edit requested".into()),
        };
        return Ok((input.program.clone(), prov));
    }
    let (p, mut prov) = generate_validated(bundle, reg, client, attempts, seed, "repair")?;
    prov.diff = Some(diff_programs(input.program, &p));
    Ok((p, prov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fences_are_stripped() {
        assert_eq!(extract_program_text("```tact\nbehavior B():\n    do Shoot(goal)\n```"), "behavior B():\n    do Shoot(goal)\n");
        assert_eq!(extract_program_text("behavior B():\n    do Shoot(goal)"), "behavior B():\n    do Shoot(goal)\n");
    }

    #[test]
    fn scripted_client_repeats_last() {
        let c = ScriptedClient::new(["a", "b"]);
        let got: Vec<String> = (0..3).map(|i| c.generate("", i).unwrap()).collect();
        assert_eq!(got, ["a", "b", "b"]);
        assert_eq!(c.calls(), 3);
    }
}
