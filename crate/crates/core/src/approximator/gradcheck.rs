//! Randomized agreement checks between the analytic backward passes and the
//! central-difference oracle. Shared by the test suite and the `gradcheck`
//! CLI command.

use rand::Rng;

use super::{finite_difference_gradient, ApproxKind, Approximator, LayoutBuilder, ParamVector, Tape};
use crate::rng::rng_from_seed;
use crate::Result;

/// Elementwise relative error with an absolute floor of 1e-8: differences
/// at or below the floor count as zero (they sit inside the noise of a
/// double-precision central difference), everything above is measured
/// relative to the larger magnitude.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= 1e-8 {
        0.0
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckOutcome {
    pub kind: ApproxKind,
    pub cases: usize,
    pub max_rel_error: f64,
}

/// Runs `cases` random (params, input sequence, loss) triples for `kind`
/// and reports the worst elementwise relative error between
/// [`Approximator::backward`] and the finite-difference oracle
/// (central differences, step 1e-5).
pub fn gradcheck_kind(kind: &ApproxKind, cases: usize, seed: u64) -> Result<GradcheckOutcome> {
    let mut rng = rng_from_seed(seed);
    let (in_dim, out_dim, seq_len) = match kind {
        ApproxKind::Tabular => (6, 3, 1),
        ApproxKind::Linear => (5, 4, 1),
        ApproxKind::Mlp { .. } => (4, 3, 1),
        ApproxKind::Recurrent { .. } => (3, 2, 3),
    };
    let mut worst = 0.0f64;
    for case in 0..cases {
        let mut builder = LayoutBuilder::new();
        let approx = Approximator::new("head", kind.clone(), in_dim, out_dim, &mut builder);
        let params = ParamVector::init_uniform(builder.finish(), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..seq_len)
            .map(|_| (0..in_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        let mut tape = Tape::new();
        let mut hidden = approx.initial_hidden();
        let mut outputs = Vec::new();
        for input in &inputs {
            let (out, next) = approx.forward_recorded(&params, input, hidden.as_ref(), &mut tape)?;
            outputs.push(out);
            hidden = next;
        }

        // Alternate between a random linear loss and squared error against a
        // random target; both have simple exact output gradients.
        let analytic;
        let numeric;
        if case % 2 == 0 {
            let weights: Vec<Vec<f64>> = (0..seq_len)
                .map(|_| (0..out_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            analytic = approx.backward(&params, &tape, &weights)?;
            numeric = finite_difference_gradient(
                &approx,
                &params,
                &inputs,
                &|outs| {
                    outs.iter()
                        .zip(&weights)
                        .flat_map(|(y, w)| y.iter().zip(w).map(|(yv, wv)| yv * wv))
                        .sum()
                },
                1e-5,
            )?;
        } else {
            let targets: Vec<Vec<f64>> = (0..seq_len)
                .map(|_| (0..out_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let grads: Vec<Vec<f64>> = outputs
                .iter()
                .zip(&targets)
                .map(|(y, t)| y.iter().zip(t).map(|(yv, tv)| 2.0 * (yv - tv)).collect())
                .collect();
            analytic = approx.backward(&params, &tape, &grads)?;
            numeric = finite_difference_gradient(
                &approx,
                &params,
                &inputs,
                &|outs| {
                    outs.iter()
                        .zip(&targets)
                        .flat_map(|(y, t)| y.iter().zip(t).map(|(yv, tv)| (yv - tv) * (yv - tv)))
                        .sum()
                },
                1e-5,
            )?;
        }
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n));
        }
    }
    Ok(GradcheckOutcome {
        kind: kind.clone(),
        cases,
        max_rel_error: worst,
    })
}

/// The default kind roster checked by tests and the CLI.
pub fn default_kinds() -> Vec<ApproxKind> {
    vec![
        ApproxKind::Tabular,
        ApproxKind::Linear,
        ApproxKind::Mlp { hidden: vec![8] },
        ApproxKind::Recurrent { hidden: 5 },
    ]
}
