//! Scratch probe for catapult calibration.

use zo_lab::config::*;
use zo_lab::experiments::run_catapult;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.iter().position(|a| a == "--steps").map(|i| args[i + 1].parse().unwrap()).unwrap_or(50000);
    let switch: usize = args.iter().position(|a| a == "--switch").map(|i| args[i + 1].parse().unwrap()).unwrap_or(30000);
    let cadence: usize = args.iter().position(|a| a == "--cadence").map(|i| args[i + 1].parse().unwrap()).unwrap_or(500);
    let scale: f64 = args.iter().position(|a| a == "--scale").map(|i| args[i + 1].parse().unwrap()).unwrap_or(2.0);
    let seeds: u64 = args.iter().position(|a| a == "--seeds").map(|i| args[i + 1].parse().unwrap()).unwrap_or(5);

    let spec = CatapultSpec {
        base: EosSpec {
            objective: MlpSpec {
                widths: vec![8, 16, 4],
                activation: ActivationTag::Tanh,
                dataset_kind: DatasetKindTag::GaussianClusters,
                dataset_samples: 64,
                init_gain: 1.0,
                dataset_csv: None,
            },
            optimizer: OptimizerSpec {
                family: FamilyTag::ZoGd,
                eta: None,
                momentum: 0.0,
                beta2: None,
                eps: None,
                precond_diag: None,
            },
            estimator: Some(EstimatorSpec::default()),
            eta_rule: EtaRule::TraceFraction { fraction: 0.25 },
            steps,
            cadence,
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
        let t0 = std::time::Instant::now();
        match run_catapult(&spec, seed) {
            Ok(out) => {
                let ph = &out.phases[0];
                let thr_new = 2.0 / ph.eta_new;
                // Trace path around the switch.
                let path: Vec<String> = out
                    .record
                    .snapshots
                    .iter()
                    .filter(|s| s.step + 6 * spec.base.cadence >= switch)
                    .take(14)
                    .map(|s| format!("{}:{:.1}", s.step, s.trace))
                    .collect();
                println!(
                    "seed {seed}: spike={} (pre {:.3e} peak {:.3e}) dip={} rec={} thr_new={:.1} diverged={} [{}s]",
                    ph.spike_detected,
                    ph.pre_switch_loss,
                    ph.peak_loss,
                    ph.trace_dipped,
                    ph.trace_recovered,
                    thr_new,
                    out.record.diverged,
                    t0.elapsed().as_secs()
                );
                println!("   trace near switch: {}", path.join(" "));
            }
            Err(e) => println!("seed {seed}: ERROR {e}"),
        }
    }
}
