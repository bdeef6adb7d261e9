use crate::bptt::{batch_loss_and_grads, finite_diff_against, scalar_oracle_backward, Gradients};
use crate::error::Result;
use crate::ndcore::{Matrix, Rng};
use crate::snn::{ForwardOptions, LifParams, Network, RecurrenceMode, SpikeFn, Topology};

pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const FD_TOLERANCE: f64 = 1e-6;
pub const FD_EPS: f64 = 1e-5;

/// Deliberate gradient bugs used to confirm the check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Negates every recurrent-weight gradient.
    FlipW2Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCheck {
    pub mode: RecurrenceMode,
    pub oracle_rel_error: f64,
    pub fd_rel_error: f64,
    pub fd_abs_error: f64,
    pub fd_worst: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<ModeCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{:<16} oracle rel {:.3e} (< {ORACLE_TOLERANCE:.0e})  fd rel {:.3e} (< {FD_TOLERANCE:.0e}, abs {:.1e}, worst {})  {}",
                    mode_label(c.mode),
                    c.oracle_rel_error,
                    c.fd_rel_error,
                    c.fd_abs_error,
                    c.fd_worst,
                    if c.passed { "PASS" } else { "FAIL" }
                )
            })
            .collect()
    }
}

pub fn mode_label(mode: RecurrenceMode) -> String {
    match mode {
        RecurrenceMode::Vanilla => "vanilla".into(),
        RecurrenceMode::Src { lambda } => format!("src(lambda={lambda})"),
        RecurrenceMode::Asrc { t_lambda } => format!("asrc(t_lambda={t_lambda})"),
    }
}

pub fn default_modes() -> Vec<RecurrenceMode> {
    vec![
        RecurrenceMode::Vanilla,
        RecurrenceMode::Src { lambda: 3 },
        RecurrenceMode::Asrc { t_lambda: 5 },
    ]
}

/// Tiny network and batch in a regime where every neuron spends time inside
/// the surrogate's support, so finite differences are well conditioned.
pub fn tiny_problem(mode: RecurrenceMode, hidden: &[usize], steps: usize, seed: u64) -> (Network, Vec<Matrix>, Vec<usize>) {
    let topology = Topology::uniform(3, hidden, 3, mode, LifParams::new(0.5, 1.0));
    let mut rng = Rng::new(seed);
    let mut net = Network::init(&topology, &mut rng).expect("valid tiny topology");
    for layer in &mut net.layers {
        layer.w1.scale(2.0);
        layer.w2.scale(0.5);
        if let Some(k) = layer.kernel.as_mut() {
            k.w.iter_mut().for_each(|w| *w = rng.uniform_range(-0.5, 0.5));
        }
    }
    net.readout_w.scale(3.0);
    let inputs = (0..6)
        .map(|_| {
            let data = (0..steps * 3).map(|_| 1.5 * rng.uniform()).collect();
            Matrix::from_vec(steps, 3, data).expect("sized input")
        })
        .collect();
    (net, inputs, (0..6).map(|i| i % 3).collect())
}

fn mutate(grads: &mut Gradients, mutation: Mutation) {
    if mutation == Mutation::FlipW2Sign {
        for layer in &mut grads.layers {
            layer.d_w2.scale(-1.0);
        }
    }
}

/// BPTT against the scalar tape (hard spikes) and against central
/// differences of the smoothed forward pass, for each mode.
pub fn run_gradcheck(modes: &[RecurrenceMode], seed: u64, mutation: Mutation) -> Result<GradcheckReport> {
    let mut checks = Vec::new();
    for &mode in modes {
        let (net, xs, ys) = tiny_problem(mode, &[4], 20, seed);
        let refs: Vec<&Matrix> = xs.iter().collect();

        let mut ours = batch_loss_and_grads(&net, &refs, &ys, ForwardOptions::train(), None)?.grads;
        mutate(&mut ours, mutation);
        let (_, oracle) = scalar_oracle_backward(&net, &refs, &ys, SpikeFn::Heaviside)?;
        let oracle_rel_error = ours.max_rel_diff(&oracle, 1e-12);

        let mut smooth = batch_loss_and_grads(&net, &refs, &ys, ForwardOptions::smooth(), None)?.grads;
        mutate(&mut smooth, mutation);
        let fd = finite_diff_against(&net, &refs, &ys, FD_EPS, None, &smooth)?;

        checks.push(ModeCheck {
            mode,
            oracle_rel_error,
            fd_rel_error: fd.max_rel_error,
            fd_abs_error: fd.max_abs_error,
            fd_worst: format!("{}[{}]", fd.worst_param, fd.worst_index),
            passed: oracle_rel_error < ORACLE_TOLERANCE && fd.max_rel_error < FD_TOLERANCE,
        });
    }
    Ok(GradcheckReport { checks })
}
