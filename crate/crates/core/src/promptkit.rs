//! Prompt templates, reproduced byte-for-byte.

use thiserror::Error;

pub const TRIPTYCH_PREFIX: &str = "A triptych with three side-by-side images.";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` contains a brace")]
    BraceInField(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PromptTemplate {
    /// Text-prompt editing on a triptych canvas.
    TriptychEdit { label: String, instruction: String },
    /// Dataset instruction for swapping an element.
    ReplaceInstruction { source_name: String, reference_name: String },
    /// Dataset instruction for adding an element.
    AddInstruction { label: String },
}

fn field<'a>(name: &'static str, value: &'a str) -> Result<&'a str, PromptError> {
    if value.is_empty() {
        return Err(PromptError::MissingField(name));
    }
    if value.contains('{') || value.contains('}') {
        return Err(PromptError::BraceInField(name));
    }
    Ok(value)
}

impl PromptTemplate {
    pub fn render(&self) -> Result<String, PromptError> {
        Ok(match self {
            PromptTemplate::TriptychEdit { label, instruction } => {
                let label = field("label", label)?;
                let instruction = field("instruction", instruction)?;
                format!(
                    "{TRIPTYCH_PREFIX} On the left is a photo of {label}; on the right, the scene is exactly the same as in the middle but {instruction} on the left."
                )
            }
            PromptTemplate::ReplaceInstruction { source_name, reference_name } => {
                let source = field("source_name", source_name)?;
                let reference = field("reference_name", reference_name)?;
                format!("replace {source} with {reference}")
            }
            PromptTemplate::AddInstruction { label } => format!("add {}", field("label", label)?),
        })
    }
}
