//! Scratch calibration probe for the edge-of-stability training runs.

use zo_lab::config::*;
use zo_lab::experiments::run_eos_track;

fn base_spec(fo: bool, steps: usize, cadence: usize, gain: f64, fraction: f64) -> EosSpec {
    EosSpec {
        objective: MlpSpec {
            widths: vec![8, 16, 4],
            activation: ActivationTag::Tanh,
            dataset_kind: DatasetKindTag::GaussianClusters,
            dataset_samples: 64,
            init_gain: gain,
            dataset_csv: None,
        },
        optimizer: OptimizerSpec {
            family: if fo { FamilyTag::Gd } else { FamilyTag::ZoGd },
            eta: None,
            momentum: 0.0,
            beta2: None,
            eps: None,
            precond_diag: None,
        },
        estimator: if fo { None } else { Some(EstimatorSpec::default()) },
        eta_rule: if fo {
            EtaRule::LambdaFraction { fraction }
        } else {
            EtaRule::TraceFraction { fraction }
        },
        steps,
        cadence,
        power_iters: 50,
        trace_probes: 500,
        relcomm_probes: None,
        adam: false,
        divergence_cutoff: 1e12,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fo = args.iter().any(|a| a == "--fo");
    let steps: usize = args.iter().position(|a| a == "--steps").map(|i| args[i + 1].parse().unwrap()).unwrap_or(20000);
    let cadence: usize = args.iter().position(|a| a == "--cadence").map(|i| args[i + 1].parse().unwrap()).unwrap_or(500);
    let gain: f64 = args.iter().position(|a| a == "--gain").map(|i| args[i + 1].parse().unwrap()).unwrap_or(1.0);
    let fraction: f64 = args.iter().position(|a| a == "--frac").map(|i| args[i + 1].parse().unwrap()).unwrap_or(0.2);
    let seeds: u64 = args.iter().position(|a| a == "--seeds").map(|i| args[i + 1].parse().unwrap()).unwrap_or(5);

    let spec = base_spec(fo, steps, cadence, gain, fraction);
    for seed in 0..seeds {
        let t0 = std::time::Instant::now();
        match run_eos_track(&spec, seed) {
            Ok(out) => {
                let traces: Vec<f64> = out
                    .record
                    .snapshots
                    .iter()
                    .map(|s| if fo { s.lambda_max } else { s.trace } / out.threshold)
                    .collect();
                let show: Vec<String> = traces
                    .iter()
                    .step_by((traces.len() / 12).max(1))
                    .map(|r| format!("{r:.3}"))
                    .collect();
                let losses: Vec<String> = out
                    .record
                    .steps
                    .iter()
                    .step_by((out.record.steps.len() / 8).max(1))
                    .map(|l| format!("{:.2e}", l.loss))
                    .collect();
                println!(
                    "seed {seed}: eta={:.5} thr={:.2} med_ratio(trace)={:?} med_ratio(lam)={:?} diverged={} [{}s]",
                    out.eta,
                    out.threshold,
                    out.median_trace.map(|t| t / out.threshold),
                    out.median_lambda.map(|l| l / out.threshold),
                    out.diverged,
                    t0.elapsed().as_secs()
                );
                println!("   ratio path: {}", show.join(" "));
                println!("   loss path:  {}", losses.join(" "));
            }
            Err(e) => println!("seed {seed}: ERROR {e}"),
        }
    }
}
