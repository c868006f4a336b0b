//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::*;
use pirisk::harness::{self, care_improvement, cost_reduction, ExperimentConfig};
use pirisk::synthgen::{self, GeneratorConfig};
use pirisk::{cohort, featurelab};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn record(out: &mut Vec<Outcome>, id: u32, name: &'static str, result: Result<String, String>) {
    let (pass, detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    println!("criterion {id} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { id, name, pass, detail });
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn metric_oracle() -> Result<String, String> {
    let (r, took) = timed(|| check_metric_oracle(200, 20_240_601));
    r?;
    if took > Duration::from_secs(30) {
        return Err(format!("200 sets agree but took {took:.1?} (limit 30 s)"));
    }
    Ok(format!("200 score sets agree with the brute-force sweep in {took:.1?}"))
}

fn or_equivalence() -> Result<String, String> {
    let mut r = rng(99);
    let mut stays = Vec::new();
    while stays.len() < 1000 {
        stays.extend(random_stays(&mut r, 250));
    }
    stays.truncate(1000);
    check_or_equivalence(&stays)?;
    Ok("1000 stays, every distinct score".into())
}

fn derived_arithmetic() -> Result<String, String> {
    let c = cost_reduction(0.1281, 0.2099);
    let i = care_improvement(0.8182, 0.50);
    let detail = format!("cost reduction {c:.4}, care improvement {i:.4}");
    if (c - 0.3897).abs() <= 1e-4 && (i - 0.6364).abs() <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn preprocessor(ds: &featurelab::DayDataset) -> Result<String, String> {
    check_preprocessor(ds)?;
    Ok("median 0 on every numeric column, IQR-0 columns only centred, 40 specs -> 80 columns".into())
}

struct Run {
    report: String,
    artifacts: Vec<String>,
    took: Duration,
    threads: usize,
    experiment: harness::Experiment,
}

fn run_in_pool(threads: usize, cfg: &ExperimentConfig, ds: &featurelab::DayDataset) -> Result<Run, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let (ex, took) = timed(|| pool.install(|| harness::run_experiment(cfg, ds, None)));
    let ex = ex.map_err(|e| e.to_string())?;
    let artifacts = ex
        .pipelines
        .iter()
        .map(|(_, p)| p.to_json().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(Run { report: ex.report.to_json(), artifacts, took, threads, experiment: ex })
}

fn end_to_end(run: &Run, oracle: &[synthgen::OracleRow], ds: &featurelab::DayDataset) -> Result<String, String> {
    let r = &run.experiment.report;
    let test = test_labels(run, ds);
    let oracle_p = synthgen::oracle_best_precision_at_sensitivity(oracle, &test, r.target_sensitivity)
        .map_err(|e| e.to_string())?;
    let braden = r.baseline.curve_precision_at_target;
    let mut parts = vec![format!("Braden {braden:.4}")];
    let mut fails = Vec::new();
    let mut best = 0.0f64;
    for m in &r.models {
        let p = m.metrics.curve_precision_at_target;
        best = best.max(p);
        parts.push(format!(
            "{} {p:.4} (train threshold {})",
            m.metrics.code,
            m.metrics.test_at_target.precision.map_or("n/a".into(), |v| format!("{v:.4}"))
        ));
        if p < braden {
            fails.push(format!("{} below Braden", m.metrics.code));
        }
    }
    if r.models.len() != 3 {
        fails.push(format!("{} models reported", r.models.len()));
    }
    let ratio = best / oracle_p;
    parts.push(format!("oracle {oracle_p:.4}, best/oracle {ratio:.3}"));
    if ratio < 0.85 {
        fails.push("best model under 85% of oracle".into());
    }
    let limit = Duration::from_secs(600);
    parts.push(format!("run {:.1?} on {} thread(s)", run.took, run.threads));
    if run.took > limit {
        fails.push("slower than 10 min".into());
    }
    let detail = parts.join("; ");
    if fails.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail} -- {}", fails.join(", ")))
    }
}

fn test_labels(run: &Run, ds: &featurelab::DayDataset) -> BTreeMap<String, bool> {
    let plan = harness::plan_experiment(&ExperimentConfig::default(), ds, None).expect("planned once already");
    let digest = pirisk::pipeline::stay_set_digest(plan.split.test_stays().iter().map(String::as_str));
    assert_eq!(digest, run.experiment.report.test_stays_digest);
    plan.split
        .test_stays()
        .into_iter()
        .map(|s| {
            let l = ds.stay_labels[&s];
            (s, l)
        })
        .collect()
}

fn determinism(a: &Run, b: &Run, threads: (usize, usize)) -> Result<String, String> {
    let detail = format!(
        "{} vs {} thread(s): report {} bytes, {} artifacts ({:.1?} / {:.1?})",
        threads.0,
        threads.1,
        a.report.len(),
        a.artifacts.len(),
        a.took,
        b.took
    );
    if a.report != b.report {
        return Err(format!("{detail} -- reports differ"));
    }
    if a.artifacts != b.artifacts {
        return Err(format!("{detail} -- artifacts differ"));
    }
    Ok(detail)
}

fn main() {
    let mut out = Vec::new();
    record(&mut out, 1, "metric oracle equivalence", metric_oracle());
    record(&mut out, 2, "OR-equivalence", or_equivalence());
    record(&mut out, 3, "derived-figure arithmetic", derived_arithmetic());
    record(
        &mut out,
        4,
        "LR gradient check",
        check_lr_gradient(20, 4).map(|_| "20 points, relative error <= 1e-5".into()),
    );
    record(
        &mut out,
        5,
        "GBDT monotonicity",
        check_gbdt(10, 5).map(|_| "10 datasets non-increasing; depth 0 equals prevalence within 1e-9".into()),
    );

    let cfg = GeneratorConfig::default();
    let generated = synthgen::generate_cohort(&cfg).expect("default config generates");
    let (store, _) = cohort::apply_filters(&generated.store);
    let ds = featurelab::build_dataset(&store, &featurelab::default_specs()).expect("default specs extract");
    record(&mut out, 6, "preprocessor properties", preprocessor(&ds));
    record(
        &mut out,
        7,
        "anti-leakage",
        check_poison(&store).map(|_| format!("{} rows unchanged after poisoning", ds.rows.len())),
    );

    let exp = ExperimentConfig::default();
    let threads = (1, 4);
    let first = run_in_pool(threads.0, &exp, &ds);
    match &first {
        Ok(run) => record(&mut out, 8, "end-to-end synthetic run", end_to_end(run, &generated.oracle, &ds)),
        Err(e) => record(&mut out, 8, "end-to-end synthetic run", Err(e.clone())),
    }
    let second = run_in_pool(threads.1, &exp, &ds);
    let det = match (&first, &second) {
        (Ok(a), Ok(b)) => determinism(a, b, threads),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    record(&mut out, 9, "determinism", det);

    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass).collect();
    println!("acceptance: {} passed, {} failed", out.len() - failed.len(), failed.len());
    for o in &failed {
        eprintln!("failed criterion {} ({}): {}", o.id, o.name, o.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
