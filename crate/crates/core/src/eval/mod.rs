//! ROUGE scoring, byte capping, the prefix baseline, extractive percentage
//! and output-length histograms.

mod rouge;
mod text;

use crate::error::{Error, Result};
use crate::textpipe::normalize;

pub use rouge::{lcs_length, rouge_l, rouge_n, RougeScore};
pub use text::{
    byte_cap, extractive_pct, histogram_to_string, length_histogram, prefix_baseline, DUC_BYTE_LIMIT, PREFIX_CHARS,
};

/// Mean scores of one system over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemScores {
    pub name: String,
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
    /// Mean over examples with a non-empty output.
    pub extractive_pct: Option<f64>,
    pub examples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Cap candidates to this many bytes before scoring.
    pub byte_limit: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            byte_limit: Some(DUC_BYTE_LIMIT),
        }
    }
}

fn mean_score(scores: &[RougeScore]) -> RougeScore {
    let n = scores.len() as f64;
    RougeScore {
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
    }
}

/// Scores aligned candidates against one or more references per example.
/// Texts are tokenized with the corpus normalizer; `inputs`, when given,
/// drive the extractive percentage.
pub fn evaluate_system(
    name: &str,
    candidates: &[String],
    references: &[Vec<String>],
    inputs: Option<&[String]>,
    options: EvalOptions,
) -> Result<SystemScores> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("candidates"));
    }
    if references.len() != candidates.len() || inputs.is_some_and(|i| i.len() != candidates.len()) {
        return Err(Error::InvalidArgument(format!(
            "{} candidates, {} reference rows, {} inputs",
            candidates.len(),
            references.len(),
            inputs.map_or(candidates.len(), <[String]>::len)
        )));
    }
    let (mut r1, mut r2, mut rl, mut ext) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, (cand, refs)) in candidates.iter().zip(references).enumerate() {
        let capped = match options.byte_limit {
            Some(limit) => byte_cap(cand, limit),
            None => cand.clone(),
        };
        let c = normalize(&capped);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| normalize(r)).collect();
        r1.push(rouge_n(&c, &refs, 1)?);
        r2.push(rouge_n(&c, &refs, 2)?);
        rl.push(rouge_l(&c, &refs)?);
        if let Some(inputs) = inputs {
            if let Some(e) = extractive_pct(&c, &normalize(&inputs[i])) {
                ext.push(e);
            }
        }
    }
    Ok(SystemScores {
        name: name.to_owned(),
        rouge1: mean_score(&r1),
        rouge2: mean_score(&r2),
        rouge_l: mean_score(&rl),
        extractive_pct: (!ext.is_empty()).then(|| ext.iter().sum::<f64>() / ext.len() as f64),
        examples: candidates.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub systems: Vec<SystemScores>,
}

impl EvalReport {
    /// Recall ×100 per metric plus extractive percentage.
    pub fn to_table(&self) -> String {
        let width = self.systems.iter().map(|s| s.name.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}  {:>7} {:>7} {:>7} {:>7}\n", "system", "R-1", "R-2", "R-L", "Ext.%");
        for s in &self.systems {
            let ext = s.extractive_pct.map_or("-".to_owned(), |e| format!("{e:.1}"));
            out.push_str(&format!(
                "{:<width$}  {:>7.2} {:>7.2} {:>7.2} {:>7}\n",
                s.name,
                100.0 * s.rouge1.recall,
                100.0 * s.rouge2.recall,
                100.0 * s.rouge_l.recall,
                ext
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,examples,r1_recall,r1_precision,r1_f1,r2_recall,r2_precision,r2_f1,rl_recall,rl_precision,rl_f1,extractive_pct\n");
        for s in &self.systems {
            out.push_str(&format!("{},{}", s.name, s.examples));
            for r in [s.rouge1, s.rouge2, s.rouge_l] {
                out.push_str(&format!(",{},{},{}", r.recall, r.precision, r.f1));
            }
            out.push_str(&format!(",{}\n", s.extractive_pct.map_or(String::new(), |e| e.to_string())));
        }
        out
    }
}
