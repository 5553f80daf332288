use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Sparse binary design matrix with duplicate rows folded into counts.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingData<F> {
    pub dim: usize,
    /// Sorted feature indices per row.
    pub rows: Vec<Vec<usize>>,
    pub labels: Vec<bool>,
    pub counts: Vec<F>,
}

impl<F: Scalar> TrainingData<F> {
    /// Builds the vocabulary (sorted feature names) and folds identical
    /// labelled rows.
    pub fn from_examples<S: AsRef<str>>(examples: &[(Vec<S>, bool)]) -> (Vec<String>, Self) {
        let vocab: BTreeSet<&str> = examples
            .iter()
            .flat_map(|(f, _)| f.iter().map(AsRef::as_ref))
            .collect();
        let vocab: Vec<String> = vocab.into_iter().map(str::to_string).collect();
        let index: BTreeMap<&str, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let mut folded: BTreeMap<(Vec<usize>, bool), usize> = BTreeMap::new();
        for (feats, label) in examples {
            let mut row: Vec<usize> = feats.iter().map(|f| index[f.as_ref()]).collect();
            row.sort_unstable();
            row.dedup();
            *folded.entry((row, *label)).or_default() += 1;
        }
        let mut data = TrainingData {
            dim: vocab.len(),
            rows: Vec::with_capacity(folded.len()),
            labels: Vec::with_capacity(folded.len()),
            counts: Vec::with_capacity(folded.len()),
        };
        for ((row, label), n) in folded {
            data.rows.push(row);
            data.labels.push(label);
            data.counts.push(F::of_usize(n));
        }
        (vocab, data)
    }

    pub fn total(&self) -> F {
        self.counts.iter().copied().sum()
    }
}

fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<F: Scalar>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}

/// L2-regularized logistic regression over binary features. Features not
/// seen in training are ignored at prediction time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct LogisticRegression<F> {
    pub weights: IndexMap<String, F>,
    pub bias: F,
    pub l2: F,
    pub threshold: F,
    pub epochs: usize,
    pub converged: bool,
}

impl<F: Scalar> LogisticRegression<F> {
    /// Mean log-loss plus `l2 / (2n) * |w|^2`, where `n` is the number of
    /// examples; the bias is not penalized.
    pub fn objective(w: &[F], b: F, l2: F, data: &TrainingData<F>) -> F {
        let n = data.total();
        let mut loss = F::zero();
        for ((row, &y), &c) in data.rows.iter().zip(&data.labels).zip(&data.counts) {
            let z = b + row.iter().map(|&j| w[j]).sum::<F>();
            let yz = if y { z } else { F::zero() };
            loss = loss + c * (softplus(z) - yz);
        }
        let reg = w.iter().map(|&x| x * x).sum::<F>() * l2 / F::of(2.0);
        (loss + reg) / n
    }

    pub fn gradient(w: &[F], b: F, l2: F, data: &TrainingData<F>) -> (Vec<F>, F) {
        let n = data.total();
        let mut gw: Vec<F> = w.iter().map(|&x| x * l2).collect();
        let mut gb = F::zero();
        for ((row, &y), &c) in data.rows.iter().zip(&data.labels).zip(&data.counts) {
            let z = b + row.iter().map(|&j| w[j]).sum::<F>();
            let target = if y { F::one() } else { F::zero() };
            let r = c * (sigmoid(z) - target);
            gb = gb + r;
            for &j in row {
                gw[j] = gw[j] + r;
            }
        }
        gw.iter_mut().for_each(|g| *g = *g / n);
        (gw, gb / n)
    }

    /// Accelerated batch gradient descent with step `1 / L`, `L` bounding
    /// the curvature of the objective. Momentum restarts whenever it points
    /// uphill. Stops once the gradient norm drops below `tolerance` or after
    /// `max_epochs` passes.
    pub fn fit<S: AsRef<str>>(
        examples: &[(Vec<S>, bool)],
        l2: F,
        max_epochs: usize,
        tolerance: F,
        threshold: F,
    ) -> Self {
        let (vocab, data) = TrainingData::<F>::from_examples(examples);
        let n = data.total();
        let widest = data.rows.iter().map(Vec::len).max().unwrap_or(0);
        let lipschitz = F::of_usize(widest + 1) / F::of(4.0) + l2 / n.max(F::one());
        let step = F::one() / lipschitz;
        // (w, b) is the current iterate, (yw, yb) the extrapolated point
        let mut w = vec![F::zero(); data.dim];
        let mut b = F::zero();
        let mut yw = w.clone();
        let mut yb = b;
        let mut t = F::one();
        let mut epochs = 0;
        let mut converged = false;
        while epochs < max_epochs {
            let (gw, gb) = Self::gradient(&yw, yb, l2, &data);
            let norm = (gw.iter().map(|&g| g * g).sum::<F>() + gb * gb).sqrt();
            if norm < tolerance {
                w = yw;
                b = yb;
                converged = true;
                break;
            }
            let next_w: Vec<F> = yw.iter().zip(&gw).map(|(&y, &g)| y - step * g).collect();
            let next_b = yb - step * gb;
            let uphill = gw
                .iter()
                .zip(next_w.iter().zip(&w))
                .map(|(&g, (&x1, &x0))| g * (x1 - x0))
                .sum::<F>()
                + gb * (next_b - b)
                > F::zero();
            let next_t = if uphill {
                F::one()
            } else {
                (F::one() + (F::one() + F::of(4.0) * t * t).sqrt()) / F::of(2.0)
            };
            let momentum = if uphill {
                F::zero()
            } else {
                (t - F::one()) / next_t
            };
            yw = next_w
                .iter()
                .zip(&w)
                .map(|(&x1, &x0)| x1 + momentum * (x1 - x0))
                .collect();
            yb = next_b + momentum * (next_b - b);
            w = next_w;
            b = next_b;
            t = next_t;
            epochs += 1;
        }
        LogisticRegression {
            weights: vocab.into_iter().zip(w).collect(),
            bias: b,
            l2,
            threshold,
            epochs,
            converged,
        }
    }

    pub fn probability<S: AsRef<str>>(&self, features: &[S]) -> F {
        let z = self.bias
            + features
                .iter()
                .filter_map(|f| self.weights.get(f.as_ref()).copied())
                .sum::<F>();
        sigmoid(z)
    }

    pub fn predict<S: AsRef<str>>(&self, features: &[S]) -> bool {
        self.probability(features) >= self.threshold
    }

    pub fn weight(&self, feature: &str) -> Option<f64> {
        self.weights.get(feature).map(|&w| w.as_f64())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ex(f: &[&str], y: bool) -> (Vec<String>, bool) {
        (f.iter().map(|s| s.to_string()).collect(), y)
    }

    #[test]
    fn separable_single_feature() {
        let data = vec![
            ex(&["f", "a"], true),
            ex(&["f", "b"], true),
            ex(&["f"], true),
            ex(&["a"], false),
            ex(&["b"], false),
            ex(&["c"], false),
            ex(&["a", "b"], false),
        ];
        let m = LogisticRegression::<f64>::fit(&data, 1.0, 500, 1e-6, 0.5);
        for (f, y) in &data {
            assert_eq!(m.predict(f), *y, "{f:?}");
        }
        // f carries all the signal
        let wf = m.weight("f").unwrap();
        for other in ["a", "b", "c"] {
            assert!(wf > m.weight(other).unwrap());
        }
        assert_eq!(m.weight("unseen"), None);
        assert_eq!(m.probability(&["f", "unseen"]), m.probability(&["f"]));
    }

    #[test]
    fn duplicate_rows_fold_into_counts() {
        let (vocab, d) = TrainingData::<f64>::from_examples(&[
            ex(&["x", "y"], true),
            ex(&["y", "x"], true),
            ex(&["x"], false),
        ]);
        assert_eq!(vocab, ["x", "y"]);
        assert_eq!(d.rows.len(), 2);
        assert_eq!(d.total(), 3.0);
    }

    #[test]
    fn f32_instance_trains() {
        let data = vec![ex(&["f"], true), ex(&["g"], false)];
        let m = LogisticRegression::<f32>::fit(&data, 1.0, 200, 1e-4, 0.5);
        assert!(m.predict(&["f"]) && !m.predict(&["g"]));
    }

    #[test]
    fn convergence_stops_early() {
        let data = vec![ex(&["f"], true), ex(&["f"], false)];
        let m = LogisticRegression::<f64>::fit(&data, 1.0, 500, 1e-6, 0.5);
        assert!(m.converged);
        assert!(m.epochs < 500);
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            rows in proptest::collection::vec((proptest::collection::btree_set(0usize..6, 0..5), any::<bool>(), 1usize..4), 1..12),
            w in proptest::collection::vec(-2.0f64..2.0, 6),
            b in -1.0f64..1.0,
            l2 in 0.0f64..3.0,
        ) {
            let data = TrainingData {
                dim: 6,
                rows: rows.iter().map(|(r, _, _)| r.iter().copied().collect()).collect(),
                labels: rows.iter().map(|(_, y, _)| *y).collect(),
                counts: rows.iter().map(|(_, _, c)| *c as f64).collect(),
            };
            let (gw, gb) = LogisticRegression::gradient(&w, b, l2, &data);
            let h = 1e-5;
            let close = |analytic: f64, numeric: f64| {
                (analytic - numeric).abs() <= 1e-5 * analytic.abs().max(numeric.abs()).max(1e-3)
            };
            for j in 0..6 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let num = (LogisticRegression::objective(&wp, b, l2, &data) - LogisticRegression::objective(&wm, b, l2, &data)) / (2.0 * h);
                prop_assert!(close(gw[j], num), "w{}: {} vs {}", j, gw[j], num);
            }
            let num = (LogisticRegression::objective(&w, b + h, l2, &data) - LogisticRegression::objective(&w, b - h, l2, &data)) / (2.0 * h);
            prop_assert!(close(gb, num), "b: {} vs {}", gb, num);
        }
    }
}
