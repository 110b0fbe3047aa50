//! Differentiable function approximators over a flat parameter vector.
//!
//! Four fixed architectures are supported: a tabular lookup (linear map
//! over one-hot input, no bias), a linear layer, a tanh MLP, and a gated
//! recurrent cell (input/forget/output gating with a cell state) followed
//! by a linear readout. Each has a hand-written backward pass; general
//! autodiff is deliberately out of scope, which keeps every gradient path
//! small enough to verify against the central-difference oracle in
//! [`finite_difference_gradient`].
//!
//! Forward evaluation is pure. To compute gradients, record the forward
//! pass on a [`Tape`] and call [`Approximator::backward`] with one output
//! gradient per recorded step; for recurrent approximators this runs
//! backpropagation through time across the whole recorded sequence.

mod checkpoint;
pub mod gradcheck;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use params::{LayoutBuilder, ParamLayout, ParamVector, Segment, SegmentId};

use crate::error::CoreError;
use crate::Result;

/// Architecture selector for [`Approximator`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ApproxKind {
    /// Pure lookup: output = table · input. Intended for one-hot inputs.
    Tabular,
    /// output = W · input + b
    Linear,
    /// Tanh hidden layers, linear output layer.
    Mlp { hidden: Vec<usize> },
    /// Gated recurrent cell with `hidden` units, linear readout.
    Recurrent { hidden: usize },
}

impl ApproxKind {
    pub fn is_recurrent(&self) -> bool {
        matches!(self, ApproxKind::Recurrent { .. })
    }
}

/// Recurrent state: activation vector `h` plus cell state `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl HiddenState {
    /// Episode-start state: all zeros.
    pub fn zeros(units: usize) -> Self {
        Self {
            h: vec![0.0; units],
            c: vec![0.0; units],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct TensorRef {
    id: SegmentId,
}

#[derive(Debug, Clone)]
enum Arch {
    Tabular {
        table: TensorRef,
    },
    Linear {
        w: TensorRef,
        b: TensorRef,
    },
    Mlp {
        /// (weights, bias) per layer; `dims[l]` -> `dims[l+1]`.
        layers: Vec<(TensorRef, TensorRef)>,
        dims: Vec<usize>,
    },
    Recurrent {
        /// Gate pre-activations are packed [input, forget, candidate, output],
        /// `units` rows each.
        w_in: TensorRef,
        w_rec: TensorRef,
        b_gates: TensorRef,
        w_out: TensorRef,
        b_out: TensorRef,
        units: usize,
    },
}

/// One differentiable head: architecture plus the parameter segments it
/// owns inside a shared [`ParamVector`].
#[derive(Debug, Clone)]
pub struct Approximator {
    head: String,
    kind: ApproxKind,
    in_dim: usize,
    out_dim: usize,
    arch: Arch,
}

/// Cached intermediate values from one recorded forward step.
#[derive(Debug, Clone)]
enum StepTrace {
    Affine {
        input: Vec<f64>,
    },
    Mlp {
        /// acts[0] = input, acts[l] = post-activation of layer l.
        acts: Vec<Vec<f64>>,
    },
    Recurrent {
        input: Vec<f64>,
        h_prev: Vec<f64>,
        c_prev: Vec<f64>,
        gate_i: Vec<f64>,
        gate_f: Vec<f64>,
        gate_g: Vec<f64>,
        gate_o: Vec<f64>,
        cell_tanh: Vec<f64>,
        h: Vec<f64>,
    },
}

/// Recorded forward pass. For recurrent approximators the steps form one
/// unrolled sequence; for the others they are independent evaluations whose
/// gradients sum.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    steps: Vec<StepTrace>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out = M · x where M is `rows x cols`, row-major.
fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(x).map(|(w, v)| w * v).sum();
    }
}

/// out += Mᵀ · g
fn matvec_transpose_acc(m: &[f64], rows: usize, cols: usize, g: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for c in 0..cols {
            out[c] += row[c] * g[r];
        }
    }
}

/// dM += g ⊗ x
fn outer_acc(dm: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, gr) in g.iter().enumerate() {
        let row = &mut dm[r * cols..(r + 1) * cols];
        for (w, xv) in row.iter_mut().zip(x) {
            *w += gr * xv;
        }
    }
}

impl Approximator {
    /// Registers this head's tensors on `builder` and returns the head.
    /// `head` must be unique within the layout.
    pub fn new(
        head: &str,
        kind: ApproxKind,
        in_dim: usize,
        out_dim: usize,
        builder: &mut LayoutBuilder,
    ) -> Self {
        assert!(in_dim > 0 && out_dim > 0, "dimensions must be positive");
        let seg = |b: &mut LayoutBuilder, tensor: &str, len: usize, fan_in: usize| TensorRef {
            id: b.segment(head, tensor, len, fan_in),
        };

        let arch = match &kind {
            ApproxKind::Tabular => Arch::Tabular {
                table: seg(builder, "table", out_dim * in_dim, in_dim),
            },
            ApproxKind::Linear => Arch::Linear {
                w: seg(builder, "w", out_dim * in_dim, in_dim),
                b: seg(builder, "b", out_dim, in_dim),
            },
            ApproxKind::Mlp { hidden } => {
                let mut dims = vec![in_dim];
                dims.extend_from_slice(hidden);
                dims.push(out_dim);
                let mut layers = Vec::new();
                for l in 0..dims.len() - 1 {
                    let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                    let w = seg(builder, &format!("w{l}"), fan_out * fan_in, fan_in);
                    let b = seg(builder, &format!("b{l}"), fan_out, fan_in);
                    layers.push((w, b));
                }
                Arch::Mlp { layers, dims }
            }
            ApproxKind::Recurrent { hidden } => {
                let units = *hidden;
                assert!(units > 0, "recurrent hidden size must be positive");
                // Gate inputs see both x and h, so scale init by the joint fan-in.
                let fan = in_dim + units;
                Arch::Recurrent {
                    w_in: seg(builder, "w_in", 4 * units * in_dim, fan),
                    w_rec: seg(builder, "w_rec", 4 * units * units, fan),
                    b_gates: seg(builder, "b_gates", 4 * units, fan),
                    w_out: seg(builder, "w_out", out_dim * units, units),
                    b_out: seg(builder, "b_out", out_dim, units),
                    units,
                }
            }
        };
        Self {
            head: head.to_string(),
            kind,
            in_dim,
            out_dim,
            arch,
        }
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn kind(&self) -> &ApproxKind {
        &self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn hidden_units(&self) -> Option<usize> {
        match &self.arch {
            Arch::Recurrent { units, .. } => Some(*units),
            _ => None,
        }
    }

    /// Episode-start hidden state: `Some(zeros)` for recurrent heads.
    pub fn initial_hidden(&self) -> Option<HiddenState> {
        self.hidden_units().map(HiddenState::zeros)
    }

    /// Segment ids owned by this head (for optimizer updates).
    pub fn segment_ids(&self) -> Vec<SegmentId> {
        match &self.arch {
            Arch::Tabular { table } => vec![table.id],
            Arch::Linear { w, b } => vec![w.id, b.id],
            Arch::Mlp { layers, .. } => layers.iter().flat_map(|(w, b)| [w.id, b.id]).collect(),
            Arch::Recurrent {
                w_in,
                w_rec,
                b_gates,
                w_out,
                b_out,
                ..
            } => vec![w_in.id, w_rec.id, b_gates.id, w_out.id, b_out.id],
        }
    }

    fn tensor<'p>(&self, params: &'p ParamVector, t: &TensorRef) -> &'p [f64] {
        params.segment(t.id)
    }

    fn validate(&self, params: &ParamVector, input: &[f64]) -> Result<()> {
        if input.len() != self.in_dim {
            return Err(CoreError::DimensionMismatch {
                context: "forward input",
                expected: self.in_dim,
                actual: input.len(),
            });
        }
        for id in self.segment_ids() {
            let seg = params
                .layout()
                .segments()
                .get(id.0)
                .ok_or(CoreError::LayoutMismatch)?;
            if seg.head != self.head {
                return Err(CoreError::LayoutMismatch);
            }
        }
        Ok(())
    }

    fn check_hidden(&self, hidden: Option<&HiddenState>) -> Result<()> {
        match (&self.arch, hidden) {
            (Arch::Recurrent { units, .. }, Some(h)) => {
                if h.h.len() != *units || h.c.len() != *units {
                    Err(CoreError::DimensionMismatch {
                        context: "hidden state",
                        expected: *units,
                        actual: h.h.len(),
                    })
                } else {
                    Ok(())
                }
            }
            (Arch::Recurrent { .. }, None) => Err(CoreError::HiddenState(
                "recurrent approximator requires a hidden state",
            )),
            (_, Some(_)) => Err(CoreError::HiddenState(
                "non-recurrent approximator takes no hidden state",
            )),
            (_, None) => Ok(()),
        }
    }

    /// Pure forward evaluation.
    pub fn forward(
        &self,
        params: &ParamVector,
        input: &[f64],
        hidden: Option<&HiddenState>,
    ) -> Result<(Vec<f64>, Option<HiddenState>)> {
        self.eval(params, input, hidden, None)
    }

    /// Forward evaluation that appends one step to `tape` for a later
    /// [`Approximator::backward`].
    pub fn forward_recorded(
        &self,
        params: &ParamVector,
        input: &[f64],
        hidden: Option<&HiddenState>,
        tape: &mut Tape,
    ) -> Result<(Vec<f64>, Option<HiddenState>)> {
        self.eval(params, input, hidden, Some(tape))
    }

    fn eval(
        &self,
        params: &ParamVector,
        input: &[f64],
        hidden: Option<&HiddenState>,
        tape: Option<&mut Tape>,
    ) -> Result<(Vec<f64>, Option<HiddenState>)> {
        self.validate(params, input)?;
        self.check_hidden(hidden)?;
        match &self.arch {
            Arch::Tabular { table } => {
                let mut out = vec![0.0; self.out_dim];
                matvec(
                    self.tensor(params, table),
                    self.out_dim,
                    self.in_dim,
                    input,
                    &mut out,
                );
                if let Some(t) = tape {
                    t.steps.push(StepTrace::Affine {
                        input: input.to_vec(),
                    });
                }
                Ok((out, None))
            }
            Arch::Linear { w, b } => {
                let mut out = vec![0.0; self.out_dim];
                matvec(
                    self.tensor(params, w),
                    self.out_dim,
                    self.in_dim,
                    input,
                    &mut out,
                );
                for (o, bias) in out.iter_mut().zip(self.tensor(params, b)) {
                    *o += bias;
                }
                if let Some(t) = tape {
                    t.steps.push(StepTrace::Affine {
                        input: input.to_vec(),
                    });
                }
                Ok((out, None))
            }
            Arch::Mlp { layers, dims } => {
                let mut acts: Vec<Vec<f64>> = vec![input.to_vec()];
                for (l, (w, b)) in layers.iter().enumerate() {
                    let (rows, cols) = (dims[l + 1], dims[l]);
                    let mut z = vec![0.0; rows];
                    matvec(self.tensor(params, w), rows, cols, &acts[l], &mut z);
                    for (zv, bias) in z.iter_mut().zip(self.tensor(params, b)) {
                        *zv += bias;
                    }
                    if l + 1 < layers.len() {
                        for zv in &mut z {
                            *zv = zv.tanh();
                        }
                    }
                    acts.push(z);
                }
                let out = acts.last().unwrap().clone();
                if let Some(t) = tape {
                    t.steps.push(StepTrace::Mlp { acts });
                }
                Ok((out, None))
            }
            Arch::Recurrent {
                w_in,
                w_rec,
                b_gates,
                w_out,
                b_out,
                units,
            } => {
                let n = *units;
                let prev = hidden.unwrap();
                let mut z = vec![0.0; 4 * n];
                matvec(self.tensor(params, w_in), 4 * n, self.in_dim, input, &mut z);
                let wrec = self.tensor(params, w_rec);
                for r in 0..4 * n {
                    let row = &wrec[r * n..(r + 1) * n];
                    z[r] += row.iter().zip(&prev.h).map(|(w, v)| w * v).sum::<f64>();
                }
                for (zv, bias) in z.iter_mut().zip(self.tensor(params, b_gates)) {
                    *zv += bias;
                }
                let gate_i: Vec<f64> = z[..n].iter().map(|&v| sigmoid(v)).collect();
                let gate_f: Vec<f64> = z[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
                let gate_g: Vec<f64> = z[2 * n..3 * n].iter().map(|&v| v.tanh()).collect();
                let gate_o: Vec<f64> = z[3 * n..4 * n].iter().map(|&v| sigmoid(v)).collect();
                let cell: Vec<f64> = (0..n)
                    .map(|k| gate_f[k] * prev.c[k] + gate_i[k] * gate_g[k])
                    .collect();
                let cell_tanh: Vec<f64> = cell.iter().map(|v| v.tanh()).collect();
                let h: Vec<f64> = (0..n).map(|k| gate_o[k] * cell_tanh[k]).collect();

                let mut out = vec![0.0; self.out_dim];
                matvec(self.tensor(params, w_out), self.out_dim, n, &h, &mut out);
                for (o, bias) in out.iter_mut().zip(self.tensor(params, b_out)) {
                    *o += bias;
                }

                let next = HiddenState {
                    h: h.clone(),
                    c: cell.clone(),
                };
                if let Some(t) = tape {
                    t.steps.push(StepTrace::Recurrent {
                        input: input.to_vec(),
                        h_prev: prev.h.clone(),
                        c_prev: prev.c.clone(),
                        gate_i,
                        gate_f,
                        gate_g,
                        gate_o,
                        cell_tanh,
                        h,
                    });
                }
                Ok((out, Some(next)))
            }
        }
    }

    /// Gradient of `sum_t output_t · output_grads[t]` with respect to the
    /// full parameter vector (entries outside this head stay zero).
    ///
    /// `params` must be the same values used during the recorded forward.
    /// Recurrent tapes are treated as one unrolled sequence and
    /// backpropagated through time from the last step to the first.
    pub fn backward(
        &self,
        params: &ParamVector,
        tape: &Tape,
        output_grads: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        if tape.is_empty() {
            return Err(CoreError::EmptyTape);
        }
        if output_grads.len() != tape.len() {
            return Err(CoreError::DimensionMismatch {
                context: "backward output gradients",
                expected: tape.len(),
                actual: output_grads.len(),
            });
        }
        for g in output_grads {
            if g.len() != self.out_dim {
                return Err(CoreError::DimensionMismatch {
                    context: "backward output gradient width",
                    expected: self.out_dim,
                    actual: g.len(),
                });
            }
        }
        let mut grad = vec![0.0; params.len()];
        match &self.arch {
            Arch::Tabular { table } => {
                let seg = params.layout().segment(table.id).range();
                for (trace, dy) in tape.steps.iter().zip(output_grads) {
                    let StepTrace::Affine { input } = trace else {
                        return Err(CoreError::HiddenState("tape kind mismatch"));
                    };
                    outer_acc(&mut grad[seg.clone()], dy, input);
                }
            }
            Arch::Linear { w, b } => {
                let wseg = params.layout().segment(w.id).range();
                let bseg = params.layout().segment(b.id).range();
                for (trace, dy) in tape.steps.iter().zip(output_grads) {
                    let StepTrace::Affine { input } = trace else {
                        return Err(CoreError::HiddenState("tape kind mismatch"));
                    };
                    outer_acc(&mut grad[wseg.clone()], dy, input);
                    for (gb, d) in grad[bseg.clone()].iter_mut().zip(dy) {
                        *gb += d;
                    }
                }
            }
            Arch::Mlp { layers, dims } => {
                for (trace, dy) in tape.steps.iter().zip(output_grads) {
                    let StepTrace::Mlp { acts } = trace else {
                        return Err(CoreError::HiddenState("tape kind mismatch"));
                    };
                    let mut delta = dy.clone();
                    for l in (0..layers.len()).rev() {
                        let (w, b) = &layers[l];
                        let (rows, cols) = (dims[l + 1], dims[l]);
                        let wseg = params.layout().segment(w.id).range();
                        let bseg = params.layout().segment(b.id).range();
                        outer_acc(&mut grad[wseg], &delta, &acts[l]);
                        for (gb, d) in grad[bseg].iter_mut().zip(&delta) {
                            *gb += d;
                        }
                        if l > 0 {
                            let mut da = vec![0.0; cols];
                            matvec_transpose_acc(
                                self.tensor(params, w),
                                rows,
                                cols,
                                &delta,
                                &mut da,
                            );
                            // acts[l] holds tanh activations for hidden layers.
                            delta = da
                                .iter()
                                .zip(&acts[l])
                                .map(|(d, a)| d * (1.0 - a * a))
                                .collect();
                        }
                    }
                }
            }
            Arch::Recurrent {
                w_in,
                w_rec,
                b_gates,
                w_out,
                b_out,
                units,
            } => {
                let n = *units;
                let wrec = self.tensor(params, w_rec).to_vec();
                let wout = self.tensor(params, w_out).to_vec();
                let gw_in = params.layout().segment(w_in.id).range();
                let gw_rec = params.layout().segment(w_rec.id).range();
                let gb_gates = params.layout().segment(b_gates.id).range();
                let gw_out = params.layout().segment(w_out.id).range();
                let gb_out = params.layout().segment(b_out.id).range();

                let mut dh_next = vec![0.0; n];
                let mut dc_next = vec![0.0; n];
                for (trace, dy) in tape.steps.iter().zip(output_grads).rev() {
                    let StepTrace::Recurrent {
                        input,
                        h_prev,
                        c_prev,
                        gate_i,
                        gate_f,
                        gate_g,
                        gate_o,
                        cell_tanh,
                        h,
                    } = trace
                    else {
                        return Err(CoreError::HiddenState("tape kind mismatch"));
                    };
                    // Readout layer.
                    outer_acc(&mut grad[gw_out.clone()], dy, h);
                    for (gb, d) in grad[gb_out.clone()].iter_mut().zip(dy) {
                        *gb += d;
                    }
                    let mut dh = dh_next.clone();
                    matvec_transpose_acc(&wout, self.out_dim, n, dy, &mut dh);

                    // Cell internals.
                    let mut dz = vec![0.0; 4 * n];
                    let mut dc_prev = vec![0.0; n];
                    for k in 0..n {
                        let d_o = dh[k] * cell_tanh[k];
                        let dth = dh[k] * gate_o[k];
                        let dc = dth * (1.0 - cell_tanh[k] * cell_tanh[k]) + dc_next[k];
                        let d_f = dc * c_prev[k];
                        let d_i = dc * gate_g[k];
                        let d_g = dc * gate_i[k];
                        dc_prev[k] = dc * gate_f[k];
                        dz[k] = d_i * gate_i[k] * (1.0 - gate_i[k]);
                        dz[n + k] = d_f * gate_f[k] * (1.0 - gate_f[k]);
                        dz[2 * n + k] = d_g * (1.0 - gate_g[k] * gate_g[k]);
                        dz[3 * n + k] = d_o * gate_o[k] * (1.0 - gate_o[k]);
                    }
                    outer_acc(&mut grad[gw_in.clone()], &dz, input);
                    outer_acc(&mut grad[gw_rec.clone()], &dz, h_prev);
                    for (gb, d) in grad[gb_gates.clone()].iter_mut().zip(&dz) {
                        *gb += d;
                    }
                    let mut dh_prev = vec![0.0; n];
                    matvec_transpose_acc(&wrec, 4 * n, n, &dz, &mut dh_prev);
                    dh_next = dh_prev;
                    dc_next = dc_prev;
                }
            }
        }
        Ok(grad)
    }

    /// Convenience for a single recorded step.
    pub fn backward_single(
        &self,
        params: &ParamVector,
        tape: &Tape,
        output_grad: &[f64],
    ) -> Result<Vec<f64>> {
        let grads = vec![output_grad.to_vec()];
        self.backward(params, tape, &grads)
    }
}

/// Central-difference gradient of `loss(outputs over the input sequence)`
/// with respect to this head's parameters. The sequence is evaluated from
/// the episode-start hidden state. Used by tests and the `gradcheck` CLI;
/// it intentionally shares no code with [`Approximator::backward`].
pub fn finite_difference_gradient(
    approx: &Approximator,
    params: &ParamVector,
    inputs: &[Vec<f64>],
    loss: &dyn Fn(&[Vec<f64>]) -> f64,
    step: f64,
) -> Result<Vec<f64>> {
    if step <= 0.0 {
        return Err(CoreError::invalid_config(vec![format!(
            "finite-difference step must be positive, got {step}"
        )]));
    }
    let run = |p: &ParamVector| -> Result<f64> {
        let mut hidden = approx.initial_hidden();
        let mut outputs = Vec::with_capacity(inputs.len());
        for input in inputs {
            let (out, next) = approx.forward(p, input, hidden.as_ref())?;
            outputs.push(out);
            hidden = next;
        }
        Ok(loss(&outputs))
    };
    let mut grad = vec![0.0; params.len()];
    let mut scratch = params.clone();
    for id in approx.segment_ids() {
        for i in params.layout().segment(id).range() {
            let orig = scratch.values()[i];
            scratch.values_mut()[i] = orig + step;
            let plus = run(&scratch)?;
            scratch.values_mut()[i] = orig - step;
            let minus = run(&scratch)?;
            scratch.values_mut()[i] = orig;
            grad[i] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(grad)
}
