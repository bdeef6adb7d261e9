use std::fs;
use std::path::Path;

use asnn_core::diagnostics::fmt_e12;
use asnn_core::run::*;

fn tiny(mode: &str, dir: &Path) -> RunConfig {
    let mut c = RunConfig::parse(
        "dataset = delayed_recall\n\
         delay = 4\n\
         classes = 3\n\
         train_samples = 24\n\
         test_samples = 12\n\
         hidden = 6,6\n\
         epochs = 3\n\
         batch_size = 8\n\
         base_lr = 0.01\n\
         ff_gain = 6\n\
         lambda = 2\n\
         t_lambda = 4\n",
    )
    .unwrap();
    c.set("mode", mode).unwrap();
    c.output_dir = dir.to_path_buf();
    c
}

fn metrics_column(path: &Path, name: &str) -> Vec<f64> {
    metrics_text_column(path, name).iter().map(|v| v.parse().unwrap()).collect()
}

fn metrics_text_column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().to_string()).collect()
}

#[test]
fn config_text_round_trips_and_overrides_apply() {
    let mut c = RunConfig::parse("# comment\nmode = src\nlambda = 7\nhidden = 3, 4\n").unwrap();
    assert_eq!(c.mode, ModeKind::Src);
    assert_eq!(c.hidden, vec![3, 4]);
    c.apply_override("batch_size=17").unwrap();
    assert_eq!(c.batch_size, 17);
    assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
}

#[test]
fn config_defaults_follow_smnist_hyperparameters() {
    let c = RunConfig::default();
    assert_eq!((c.base_lr, c.weight_decay, c.batch_size, c.epochs), (0.001, 0.01, 256, 200));
    assert_eq!(c.kernel_lr_multiplier, 100.0);
}

#[test]
fn invalid_configs_rejected() {
    let err = RunConfig::parse("mode = src\nlambda = 0\n").and_then(|c| c.validate());
    assert!(err.is_err());
    let err = RunConfig::parse("mode = asrc\nt_lambda = 0\n").and_then(|c| c.validate());
    assert!(err.is_err());
    let msg = RunConfig::parse("mode = src\nbogus = 1\n").unwrap_err().to_string();
    assert!(msg.contains("line 2"), "{msg}");
    assert!(RunConfig::parse("dataset = delayed_recall\n").unwrap().validate().is_err());
}

#[test]
fn missing_mnist_files_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::default();
    c.data_dir = Some(dir.path().to_path_buf());
    let msg = load_datasets(&c).unwrap_err().to_string();
    assert!(msg.contains("train-images-idx3-ubyte"), "{msg}");
}

#[test]
fn zero_epochs_writes_header_and_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny("asrc", dir.path());
    c.epochs = 0;
    train(&c).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join(files::METRICS)).unwrap(), format!("{METRICS_HEADER}\n"));
    let state = load_state(&dir.path().join(files::LAST)).unwrap();
    assert_eq!(state.epoch, 0);
    assert_eq!(state.optim.step, 0);
    assert_eq!(state.net.temperature(), Some(1.0));
    assert_eq!(state.net, build_network(&c, 3, 3).unwrap());
}

#[test]
fn identical_runs_are_byte_identical() {
    // The config echo includes the output directory, so both runs share one.
    let dir = tempfile::tempdir().unwrap();
    let names = [files::METRICS, files::CONFIG, files::LAST, files::BEST, "kernel_trace.csv", "kernel_argmax.csv"];
    let run = |seed: u64| {
        let out = dir.path().join("run");
        let _ = fs::remove_dir_all(&out);
        let mut c = tiny("asrc", &out);
        c.seed = seed;
        train(&c).unwrap();
        names.map(|n| fs::read(out.join(n)).unwrap())
    };
    let first = run(0);
    let second = run(0);
    for (name, (a, b)) in names.iter().zip(first.iter().zip(&second)) {
        assert_eq!(a, b, "{name}");
    }
    assert_ne!(run(1)[0], first[0]);
}

#[test]
fn metrics_schema() {
    let dir = tempfile::tempdir().unwrap();
    train(&tiny("src", dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join(files::METRICS)).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "epoch,train_loss,train_acc,test_acc,tau,lr");
    for (e, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[0], e.to_string());
        for f in &fields[1..] {
            let (mantissa, exp) = f.split_once('e').unwrap();
            assert_eq!(mantissa.trim_start_matches('-').len(), 14, "{f}");
            assert!(exp.starts_with('+') || exp.starts_with('-'), "{f}");
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = train(&tiny("asrc", dir.path())).unwrap();
    let state = outcome.final_state;
    assert!(state.optim.step > 0);
    let bytes = state.to_checkpoint().to_bytes();
    let back = TrainState::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(back.to_checkpoint().to_bytes(), bytes);
    assert_eq!(back.epoch, state.epoch);
    assert_eq!(back.optim.step, state.optim.step);
    assert_eq!(back.net.temperature().unwrap().to_bits(), state.net.temperature().unwrap().to_bits());
    for (x, y) in back.optim.m.iter().chain(&back.optim.v).zip(state.optim.m.iter().chain(&state.optim.v)) {
        assert!(x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    for ((_, _, x), (_, _, y)) in back.net.params().iter().zip(state.net.params().iter()) {
        assert!(x.iter().zip(y.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    let on_disk = load_state(&dir.path().join(files::LAST)).unwrap();
    assert_eq!(on_disk.to_checkpoint().to_bytes(), bytes);
}

#[test]
fn eval_of_checkpoints_matches_logged_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny("asrc", dir.path());
    let outcome = train(&c).unwrap();
    let (_, test) = load_datasets(&c).unwrap();
    let last = load_state(&dir.path().join(files::LAST)).unwrap();
    let logged = metrics_text_column(&dir.path().join(files::METRICS), "test_acc");
    assert_eq!(fmt_e12(evaluate_checked(&last.net, &test).unwrap()), *logged.last().unwrap());
    assert_eq!(evaluate_checked(&last.net, &test).unwrap(), evaluate_checked(&last.net, &test).unwrap());
    let best = load_state(&dir.path().join(files::BEST)).unwrap();
    assert_eq!(evaluate_checked(&best.net, &test).unwrap(), outcome.best_test_acc);
    assert_eq!(best.best_test_acc, outcome.best_test_acc);
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny("vanilla", dir.path());
    let net = build_network(&c, 3, 3).unwrap();
    let mut other = c.clone();
    other.classes = 4;
    let (_, test) = load_datasets(&other).unwrap();
    assert!(evaluate_checked(&net, &test).is_err());
}

#[test]
fn logged_tau_follows_decay() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny("vanilla", dir.path());
    c.epochs = 12;
    c.train_samples = 3;
    c.test_samples = 3;
    c.hidden = vec![2];
    train(&c).unwrap();
    let taus = metrics_column(&dir.path().join(files::METRICS), "tau");
    assert_eq!(taus.len(), 12);
    for (e, tau) in taus.iter().enumerate() {
        assert!((tau - 0.96f64.powi(e as i32)).abs() < 1e-12);
    }
}

#[test]
fn kernel_trace_starts_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = train(&tiny("asrc", dir.path())).unwrap();
    let trace = outcome.kernel_trace.unwrap();
    let first: Vec<_> = trace.rows.iter().filter(|r| r.epoch == 0).collect();
    assert_eq!(first.len(), 2);
    for row in first {
        assert!(row.weights.iter().all(|&w| w == 0.25));
    }
    assert_eq!(trace.rows.iter().map(|r| r.epoch).max(), Some(3));
}

#[test]
fn sweep_sorts_values_and_matches_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny("src", dir.path());
    c.epochs = 2;
    let rows = run_sweep(&c, SweepAxis::Lambda, &[3, 1, 2, 3]).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![1, 2, 3]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("lambda,best_test_acc\n"));

    let single = tempfile::tempdir().unwrap();
    let mut one = c.clone();
    one.lambda = 2;
    one.output_dir = single.path().to_path_buf();
    assert_eq!(train(&one).unwrap().best_test_acc, rows[1].best_test_acc);
    assert_eq!(
        fs::read(single.path().join(files::METRICS)).unwrap(),
        fs::read(dir.path().join("lambda_2").join(files::METRICS)).unwrap()
    );
}

#[test]
fn sweep_axis_must_match_mode() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_sweep(&tiny("vanilla", dir.path()), SweepAxis::Lambda, &[1]).is_err());
    assert!(run_sweep(&tiny("src", dir.path()), SweepAxis::TLambda, &[1]).is_err());
}

#[test]
fn adaptive_checkpoint_eval_equals_skip_network_at_argmax_lags() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny("asrc", dir.path());
    train(&c).unwrap();
    let (_, test) = load_datasets(&c).unwrap();
    let state = load_state(&dir.path().join(files::LAST)).unwrap();
    let mut src = state.net.clone();
    for layer in &mut src.layers {
        let lag = layer.kernel.take().unwrap().argmax_lag();
        layer.mode = asnn_core::snn::RecurrenceMode::Src { lambda: lag };
    }
    src.validate().unwrap();
    for x in &test.inputs {
        let a = state.net.logits(x, true).unwrap();
        let b = src.logits(x, true).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
    assert_eq!(evaluate_checked(&state.net, &test).unwrap(), evaluate_checked(&src, &test).unwrap());
}
