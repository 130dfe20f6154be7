use thiserror::Error;

/// A parameter or observation outside its valid domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    Parameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
}

impl DomainError {
    pub(crate) fn param(field: &'static str, value: f64, reason: &'static str) -> Self {
        DomainError::Parameter {
            field,
            value,
            reason,
        }
    }

    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match self {
            DomainError::Parameter { field, .. } => field,
        }
    }
}
