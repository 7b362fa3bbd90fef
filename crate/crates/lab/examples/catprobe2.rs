//! Spike-window profiling for catapult calibration.
use zo_lab::config::*;
use zo_lab::experiments::run_catapult;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |name: &str, def: f64| -> f64 {
        args.iter().position(|a| a == name).map(|i| args[i + 1].parse().unwrap()).unwrap_or(def)
    };
    let steps = arg("--steps", 50000.0) as usize;
    let switch = arg("--switch", 40000.0) as usize;
    let scale = arg("--scale", 2.0);
    let seeds = arg("--seeds", 3.0) as u64;
    let frac = arg("--frac", 0.25);
    let gain = arg("--gain", 1.0);
    let gelu = args.iter().any(|a| a == "--gelu");

    let spec = CatapultSpec {
        base: EosSpec {
            objective: MlpSpec {
                widths: vec![8, 16, 4],
                activation: if gelu { ActivationTag::Gelu } else { ActivationTag::Tanh },
                dataset_kind: DatasetKindTag::GaussianClusters,
                dataset_samples: 64,
                init_gain: gain,
                dataset_csv: None,
            },
            optimizer: OptimizerSpec {
                family: FamilyTag::ZoGd, eta: None, momentum: 0.0,
                beta2: None, eps: None, precond_diag: None,
            },
            estimator: Some(EstimatorSpec::default()),
            eta_rule: EtaRule::TraceFraction { fraction: frac },
            steps,
            cadence: 500,
            power_iters: 50,
            trace_probes: 500,
            relcomm_probes: None,
            adam: false,
            divergence_cutoff: 1e300,
        },
        schedule: vec![SchedulePoint { start_step: switch, eta_scale: scale }],
        spike_window: 50,
    };
    for seed in 0..seeds {
        match run_catapult(&spec, seed) {
            Ok(out) => {
                let pre = out.record.steps.iter().find(|l| l.step == switch).map(|l| l.loss).unwrap_or(f64::NAN);
                let mut line = String::new();
                for w in [10usize, 25, 50, 100, 200, 500, 1000, 2000, 5000] {
                    let peak = out.record.steps.iter()
                        .filter(|l| l.step > switch && l.step <= switch + w)
                        .map(|l| l.loss).fold(f64::NEG_INFINITY, f64::max);
                    line.push_str(&format!(" w{w}:{:.2}", peak / pre));
                }
                let ph = &out.phases[0];
                let post: Vec<f64> = out.record.snapshots.iter().filter(|s| s.step > switch).map(|s| s.trace).collect();
                let min_tr = post.iter().cloned().fold(f64::INFINITY, f64::min);
                let last_tr = post.last().copied().unwrap_or(f64::NAN);
                println!("seed {seed}: pre={pre:.3e} dip={} rec={} div={} thr_new={:.1} min_tr={min_tr:.1} last_tr={last_tr:.1} |{line}", ph.trace_dipped, ph.trace_recovered, out.record.diverged, 2.0 / ph.eta_new);
            }
            Err(e) => println!("seed {seed}: ERROR {e}"),
        }
    }
}
