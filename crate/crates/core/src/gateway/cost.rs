use thiserror::Error;

use super::{LlmConfig, LlmUsage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("cost per question needs at least one question")]
    NoQuestions,
}

/// Total spend: token sums times per-million prices.
pub fn total_cost(usages: &[LlmUsage], price_in: f64, price_out: f64) -> f64 {
    // integer sums first so the result does not depend on list order
    let input: u64 = usages.iter().map(|u| u.prompt_tokens).sum();
    let output: u64 = usages.iter().map(|u| u.completion_tokens).sum();
    (input as f64 * price_in + output as f64 * price_out) / 1e6
}

pub fn cost_per_question(usages: &[LlmUsage], cfg: &LlmConfig, n_questions: usize) -> Result<f64, CostError> {
    if n_questions == 0 {
        return Err(CostError::NoQuestions);
    }
    Ok(total_cost(usages, cfg.price_in, cfg.price_out) / n_questions as f64)
}
