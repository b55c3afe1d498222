//! Central finite-difference checks of analytic gradients in `f64`.
//!
//! A perturbation that flips a ReLU or a loss clamp crosses a kink where
//! the difference quotient is meaningless; such coordinates are detected
//! through [`Graph::kink_signature`] and skipped (and counted).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fidn::{Fidn, ModelInput};
use crate::graph::{Graph, Mode, Var};
use crate::{NnError, ParamStore, Result, Tensor};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor of [`relative_error`]. Central differences at
/// `h = 1e-5` carry roughly `1e-11` of absolute rounding noise, so
/// gradients below this size are compared on an absolute scale instead.
pub const RELATIVE_FLOOR: f64 = 1e-7;

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    /// Coordinate with the largest error.
    pub worst: String,
}

impl GradCheckReport {
    fn record(&mut self, what: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.checked += 1;
        if e > self.max_rel_err || self.worst.is_empty() {
            self.max_rel_err = self.max_rel_err.max(e);
            self.worst = format!("{} (analytic {analytic:e}, numeric {numeric:e})", what());
        }
    }
}

fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

/// Loss, kink signature, random weights and per-input gradients of one
/// `check_op` evaluation.
type OpEval = (f64, u64, Tensor<f64>, Option<Vec<Vec<f64>>>);

/// Checks `d/dx sum(op(inputs) * r)` for a fixed random `r` against central
/// differences at every element of every input.
pub fn check_op<F>(inputs: &[Tensor<f64>], seed: u64, op: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |xs: &[Tensor<f64>], weights: Option<&Tensor<f64>>| -> Result<OpEval> {
        let mut g = Graph::with_kink_tracking();
        let vars: Vec<Var> = xs.iter().map(|t| g.variable(t.clone())).collect();
        let out = op(&mut g, &vars)?;
        let out_t = g.value(out)?.clone();
        let Some(w) = weights else {
            return Ok((0.0, 0, out_t, None));
        };
        let wv = g.input(w.clone());
        let prod = g.mul(out, wv)?;
        let loss = g.sum(prod)?;
        let value = g.value(loss)?.data()[0];
        let sig = g.kink_signature();
        let grads = g.backward(loss)?;
        let per_input = vars
            .iter()
            .map(|&v| grads.wrt(v).map(<[f64]>::to_vec).unwrap_or_else(Vec::new))
            .collect();
        Ok((value, sig, out_t, Some(per_input)))
    };
    let (_, _, out, _) = eval(inputs, None)?;
    let weights = random_tensor(out.shape(), &mut rng);
    let (_, sig, _, analytic) = eval(inputs, Some(&weights))?;
    let analytic = analytic.unwrap_or_default();
    let mut report = GradCheckReport::default();
    let mut xs = inputs.to_vec();
    for i in 0..xs.len() {
        for j in 0..xs[i].len() {
            let orig = xs[i].data()[j];
            xs[i].data_mut()[j] = orig + DEFAULT_STEP;
            let (lp, sp, _, _) = eval(&xs, Some(&weights))?;
            xs[i].data_mut()[j] = orig - DEFAULT_STEP;
            let (lm, sm, _, _) = eval(&xs, Some(&weights))?;
            xs[i].data_mut()[j] = orig;
            if sp != sig || sm != sig {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * DEFAULT_STEP);
            let a = analytic[i].get(j).copied().unwrap_or(0.0);
            report.record(|| format!("input {i}[{j}]"), a, numeric);
        }
    }
    Ok(report)
}

fn model_loss(
    model: &Fidn,
    params: &ParamStore<f64>,
    input: &ModelInput<f64>,
    target: &Tensor<f64>,
) -> Result<(Graph<f64>, Var)> {
    let mut g = Graph::with_kink_tracking();
    let out = model.forward(&mut g, params, Mode::Eval, input)?;
    let loss = g.bce(out, target, firescope_core::metrics::BCE_EPSILON)?;
    Ok((g, loss))
}

/// Which trainable scalars [`check_model`] perturbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Every trainable scalar, in parameter-name order.
    All,
    /// This many kink-free scalars drawn uniformly over all trainable
    /// scalars with the given seed.
    Sample { count: usize, seed: u64 },
}

/// Checks the BCE gradient of the full model, with frozen (eval-mode) batch
/// statistics, at the trainable scalars selected by `coverage`.
pub fn check_model(
    model: &Fidn,
    params: &ParamStore<f64>,
    input: &ModelInput<f64>,
    target: &Tensor<f64>,
    coverage: Coverage,
) -> Result<GradCheckReport> {
    let (mut g, loss) = model_loss(model, params, input, target)?;
    let sig = g.kink_signature();
    let grads = g.backward(loss)?;
    let names: Vec<(String, usize)> = params.trainable().map(|(n, t)| (n.to_owned(), t.len())).collect();
    let total: usize = names.iter().map(|(_, l)| l).sum();
    if total == 0 {
        return Err(NnError::Config("model has no trainable parameters".into()));
    }
    let locate = |mut k: usize| -> (String, usize) {
        names
            .iter()
            .find_map(|(n, l)| {
                if k < *l {
                    Some((n.clone(), k))
                } else {
                    k -= l;
                    None
                }
            })
            .expect("index within total")
    };
    let mut work = params.clone();
    let mut report = GradCheckReport::default();
    let mut check = |report: &mut GradCheckReport, name: &str, idx: usize| -> Result<()> {
        let orig = work.get(name)?.data()[idx];
        let mut probe = |x: f64| -> Result<(f64, u64)> {
            work.get_mut(name)?.data_mut()[idx] = x;
            let (g, l) = model_loss(model, &work, input, target)?;
            Ok((g.value(l)?.data()[0], g.kink_signature()))
        };
        let (lp, sp) = probe(orig + DEFAULT_STEP)?;
        let (lm, sm) = probe(orig - DEFAULT_STEP)?;
        work.get_mut(name)?.data_mut()[idx] = orig;
        if sp != sig || sm != sig {
            report.skipped_kinks += 1;
            return Ok(());
        }
        let numeric = (lp - lm) / (2.0 * DEFAULT_STEP);
        let analytic = grads.param(name).map_or(0.0, |g| g[idx]);
        report.record(|| format!("{name}[{idx}]"), analytic, numeric);
        Ok(())
    };
    match coverage {
        Coverage::All => {
            for k in 0..total {
                let (name, idx) = locate(k);
                check(&mut report, &name, idx)?;
            }
        }
        Coverage::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut attempts = 0;
            while report.checked < count {
                attempts += 1;
                if attempts > count * 20 {
                    return Err(NnError::Config(format!(
                        "only {} of {count} coordinates were kink-free",
                        report.checked
                    )));
                }
                let (name, idx) = locate(rng.random_range(0..total));
                check(&mut report, &name, idx)?;
            }
        }
    }
    Ok(report)
}
