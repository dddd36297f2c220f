//! Hyperparameter grid search over learning rate, LSTM depth and epoch
//! budget. Cells train in parallel with decorrelated seeds; the winner is
//! the first cell with the strictly highest validation weighted-F1 at its
//! restored epoch, so reruns of the same grid pick the same cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::features::EmbeddingTable;
use crate::scalar::Scalar;

use super::model::{NeuralError, SsLstmConfig, SsLstmModel};
use super::train::{train_neural, NeuralTrainConfig, TrainedNeural};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub lrs: Vec<f64>,
    pub n_layers: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl GridSpace {
    /// Cartesian product in a fixed order: learning rate outermost, then
    /// layer count, then epochs.
    pub fn cells(&self) -> Vec<(f64, usize, usize)> {
        let mut out = Vec::with_capacity(self.lrs.len() * self.n_layers.len() * self.epochs.len());
        for &lr in &self.lrs {
            for &n in &self.n_layers {
                for &e in &self.epochs {
                    out.push((lr, n, e));
                }
            }
        }
        out
    }
}

/// Seed for cell `idx`, decorrelated from the base seed and from the other
/// cells' seeds.
pub fn cell_seed(base: u64, idx: usize) -> u64 {
    base ^ (idx as u64).wrapping_mul(0x9E3779B97F4A7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub n_layers: usize,
    pub epochs: usize,
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub valid_macro_f1: f64,
    pub valid_weighted_f1: f64,
}

pub struct GridOutcome<S: Scalar> {
    pub cells: Vec<GridCell>,
    pub best_index: usize,
    pub best: TrainedNeural<S>,
}

/// Index of the first strict maximum of `valid_weighted_f1`.
pub(crate) fn pick_best(cells: &[GridCell]) -> usize {
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        if c.valid_weighted_f1 > cells[best].valid_weighted_f1 {
            best = i;
        }
    }
    best
}

/// Train one model per grid cell. `model_cfg.n_layers` and the training
/// config's `lr`, `epochs` and `seed` are overridden per cell; everything
/// else is shared. Cells run in parallel and the result does not depend on
/// scheduling order.
pub fn grid_search<S: Scalar>(
    model_cfg: &SsLstmConfig,
    word_table: Option<&EmbeddingTable<S>>,
    train: &[Tweet],
    valid: &[Tweet],
    train_cfg: &NeuralTrainConfig,
    space: &GridSpace,
) -> Result<GridOutcome<S>, NeuralError> {
    let cells = space.cells();
    if cells.is_empty() {
        return Err(NeuralError::EmptyGrid);
    }
    let runs: Vec<Result<(GridCell, TrainedNeural<S>), NeuralError>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(lr, n_layers, epochs))| {
            let seed = cell_seed(train_cfg.seed, idx);
            let cfg = SsLstmConfig { n_layers, ..model_cfg.clone() };
            let tc = NeuralTrainConfig { lr, epochs, seed, ..train_cfg.clone() };
            let model = SsLstmModel::new(cfg, word_table, seed)?;
            let trained = train_neural(model, train, valid, &tc)?;
            let cell = GridCell {
                lr,
                n_layers,
                epochs,
                seed,
                best_epoch: trained.best_epoch,
                valid_macro_f1: trained.best_valid_macro_f1,
                valid_weighted_f1: trained.selection_score(),
            };
            Ok((cell, trained))
        })
        .collect();

    let mut results = Vec::with_capacity(runs.len());
    for run in runs {
        results.push(run?);
    }
    let cells: Vec<GridCell> = results.iter().map(|(c, _)| c.clone()).collect();
    let best_index = pick_best(&cells);
    let best = results
        .into_iter()
        .nth(best_index)
        .expect("best_index is in range")
        .1;
    Ok(GridOutcome { cells, best_index, best })
}

#[cfg(test)]
mod tests {
    use crate::corpus::{LangTag, SentimentLabel, Token};
    use crate::neural::chars::CharVocab;
    use crate::neural::model::BranchConfig;

    use super::*;

    fn tweet(id: &str, label: SentimentLabel, tokens: &[&str]) -> Tweet {
        Tweet {
            id: id.to_string(),
            label: Some(label),
            tokens: tokens
                .iter()
                .map(|t| Token { text: t.to_string(), lang: LangTag::Eng })
                .collect(),
        }
    }

    fn tiny_corpus() -> (Vec<Tweet>, Vec<Tweet>) {
        use SentimentLabel::*;
        let mut train = Vec::new();
        let mut valid = Vec::new();
        let groups: [(SentimentLabel, [&str; 2]); 3] = [
            (Positive, ["good", "love"]),
            (Negative, ["bad", "hate"]),
            (Neutral, ["theek", "okay"]),
        ];
        for (label, words) in groups {
            for (k, w) in words.iter().enumerate() {
                for r in 0..2 {
                    train.push(tweet(&format!("tr-{label}-{k}-{r}"), label, &[w, "hai", words[1 - k]]));
                }
                valid.push(tweet(&format!("va-{label}-{k}"), label, &[w, "hai"]));
            }
        }
        (train, valid)
    }

    fn tiny_cfg(train: &[Tweet]) -> SsLstmConfig {
        let vocab = CharVocab::from_texts(
            train
                .iter()
                .flat_map(|t| t.tokens.iter().map(|tok| tok.text.as_str())),
        );
        let mut cfg = SsLstmConfig::new(BranchConfig::CharOnly, vocab);
        cfg.model_dim = 12;
        cfg.hidden = 8;
        cfg.fc_hidden = 8;
        cfg.char_cnn.char_emb_dim = 4;
        cfg.char_cnn.output_dim = 12;
        cfg.char_cnn.filter_widths = vec![2, 3];
        cfg.char_cnn.filters_per_width = vec![6, 6];
        cfg
    }

    fn tiny_train_cfg() -> NeuralTrainConfig {
        NeuralTrainConfig {
            lr: 0.01,
            epochs: 6,
            batch_size: 4,
            patience: 6,
            seed: 11,
            ..NeuralTrainConfig::default()
        }
    }

    #[test]
    fn cells_enumerate_the_cartesian_product_in_order() {
        let space = GridSpace {
            lrs: vec![0.1, 0.2],
            n_layers: vec![1, 2],
            epochs: vec![3],
        };
        assert_eq!(
            space.cells(),
            vec![(0.1, 1, 3), (0.1, 2, 3), (0.2, 1, 3), (0.2, 2, 3)]
        );
    }

    #[test]
    fn ties_go_to_the_first_cell() {
        let cell = |w: f64| GridCell {
            lr: 0.1,
            n_layers: 1,
            epochs: 1,
            seed: 0,
            best_epoch: Some(0),
            valid_macro_f1: w,
            valid_weighted_f1: w,
        };
        assert_eq!(pick_best(&[cell(0.5), cell(0.5), cell(0.5)]), 0);
        assert_eq!(pick_best(&[cell(0.5), cell(0.7), cell(0.7)]), 1);
        assert_eq!(pick_best(&[cell(0.5), cell(0.4), cell(0.9)]), 2);
    }

    #[test]
    fn empty_axes_are_rejected() {
        let (train, valid) = tiny_corpus();
        let cfg = tiny_cfg(&train);
        let space = GridSpace { lrs: vec![], n_layers: vec![1], epochs: vec![2] };
        assert!(matches!(
            grid_search::<f64>(&cfg, None, &train, &valid, &tiny_train_cfg(), &space),
            Err(NeuralError::EmptyGrid)
        ));
    }

    #[test]
    fn untrained_cell_loses_to_a_trained_one() {
        let (train, valid) = tiny_corpus();
        let cfg = tiny_cfg(&train);
        let space = GridSpace { lrs: vec![0.01], n_layers: vec![1], epochs: vec![0, 6] };
        let out = grid_search::<f64>(&cfg, None, &train, &valid, &tiny_train_cfg(), &space).unwrap();
        assert_eq!(out.cells.len(), 2);
        assert_eq!(out.cells[0].epochs, 0);
        assert_eq!(out.cells[0].valid_weighted_f1, 0.0);
        assert_eq!(out.best_index, 1, "trained cell should win");
        assert!(out.cells[1].valid_weighted_f1 > 0.0);
        assert!(!out.best.history.is_empty());
    }

    #[test]
    fn grid_runs_are_deterministic() {
        let (train, valid) = tiny_corpus();
        let cfg = tiny_cfg(&train);
        let space = GridSpace { lrs: vec![0.03, 0.01], n_layers: vec![1], epochs: vec![3] };
        let a = grid_search::<f64>(&cfg, None, &train, &valid, &tiny_train_cfg(), &space).unwrap();
        let b = grid_search::<f64>(&cfg, None, &train, &valid, &tiny_train_cfg(), &space).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.best_index, b.best_index);
        assert_eq!(
            a.best.model.store.snapshot(),
            b.best.model.store.snapshot()
        );
        // Each cell carries the seed derived from its index.
        for (i, c) in a.cells.iter().enumerate() {
            assert_eq!(c.seed, cell_seed(11, i));
        }
    }
}
