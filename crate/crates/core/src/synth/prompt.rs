use serde::{Deserialize, Serialize};

use crate::dsl::ApiRegistry;

pub const SYNTHESIZE_TEMPLATE: (&str, &str) = ("synthesize.v1", include_str!("../../prompts/synthesize.v1.txt"));
pub const REPAIR_TEMPLATE: (&str, &str) = ("repair.v1", include_str!("../../prompts/repair.v1.txt"));

/// The pieces of one generation request, kept separate so callers and
/// tests can assert on them before they are flattened into text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: String,
    pub template: String,
    pub api: String,
    pub transcripts: Vec<String>,
    pub program: Option<String>,
    pub feedback: Option<String>,
    pub flow_annotations: Vec<String>,
    /// Validation errors from earlier attempts, fed back verbatim.
    pub diagnostics: Vec<String>,
}

impl PromptBundle {
    pub fn synthesis(reg: &ApiRegistry, transcripts: Vec<String>) -> Self {
        PromptBundle {
            template_id: SYNTHESIZE_TEMPLATE.0.into(),
            template: SYNTHESIZE_TEMPLATE.1.into(),
            api: reg.docs(),
            transcripts,
            program: None,
            feedback: None,
            flow_annotations: vec![],
            diagnostics: vec![],
        }
    }

    pub fn repair(
        reg: &ApiRegistry,
        transcripts: Vec<String>,
        program: String,
        feedback: String,
        flow_annotations: Vec<String>,
    ) -> Self {
        PromptBundle {
            template_id: REPAIR_TEMPLATE.0.into(),
            template: REPAIR_TEMPLATE.1.into(),
            api: reg.docs(),
            transcripts,
            program: Some(program),
            feedback: Some(feedback),
            flow_annotations,
            diagnostics: vec![],
        }
    }

    pub fn render(&self) -> String {
        let transcripts = self
            .transcripts
            .iter()
            .enumerate()
            .map(|(i, t)| format!("Demonstration {}:\n{t}\n", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        let flow = if self.flow_annotations.is_empty() {
            "(none)".to_string()
        } else {
            self.flow_annotations.join(", ")
        };
        let diagnostics = if self.diagnostics.is_empty() {
            String::new()
        } else {
            format!(
                "\n## Errors in your previous answers\nFix these and reply with the corrected program.\n{}\n",
                self.diagnostics.join("\n")
            )
        };
        self.template
            .replace("{{api}}", self.api.trim_end())
            .replace("{{transcripts}}", transcripts.trim_end())
            .replace("{{program}}", self.program.as_deref().unwrap_or("").trim_end())
            .replace("{{flow}}", &flow)
            .replace("{{feedback}}", self.feedback.as_deref().unwrap_or(""))
            .replace("{{diagnostics}}", &diagnostics)
    }
}
