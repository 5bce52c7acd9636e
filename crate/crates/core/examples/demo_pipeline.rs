//! End to end on the demo corpus: synthesize, split, train, evaluate,
//! sweep thresholds and price the result.
//!
//! ```bash
//! cargo run --release --example demo_pipeline -- /tmp/demo-report
//! ```

use std::path::PathBuf;
use std::time::Instant;

use protocoling::corpus::{stratified_split, Normalizer};
use protocoling::economics::{savings_curve, EconomicParams, Role};
use protocoling::evalkit::{
    coarse_top1_accuracy, emit_report, evaluate, lateral_confusion, EvalReport, ReportFormat, ReportOptions,
};
use protocoling::pipeline::{train_level, TrainOptions};
use protocoling::protocols::Level;
use protocoling::synthgen::{default_demo_spec, generate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("demo-report"), PathBuf::from);

    let spec = default_demo_spec();
    let corpus = generate(&spec)?;
    let split = stratified_split(&corpus.orders, 0.7, spec.seed)?;
    println!("{} train / {} test orders", split.train.len(), split.test.len());

    let started = Instant::now();
    let options = TrainOptions { epochs: 50, seed: 7, ..TrainOptions::default() };
    let (model, history) = train_level(&split.train, &corpus.hierarchy, Level::Local, &Normalizer::default(), &options)?;
    println!(
        "trained {} epochs in {:.1}s, final loss {:.4}",
        history.epochs_run,
        started.elapsed().as_secs_f64(),
        history.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );

    let records = evaluate(&model, &split.test, &corpus.hierarchy, Level::Local)?;
    let report = EvalReport::build(&records, &ReportOptions::default())?;
    for k in [1, 3, 5, 10] {
        println!("top-{k:<2} {:.4}", report.accuracy_at(k).unwrap_or(f64::NAN));
    }
    for level in [Level::Acr, Level::General] {
        let acc = coarse_top1_accuracy(&records, &corpus.hierarchy, Level::Local, level)?;
        println!("top-1 coarsened to {level}: {acc:.4}");
    }

    let h = &corpus.hierarchy;
    let pairs: Vec<[usize; 2]> = spec
        .lateral_pairs
        .iter()
        .filter_map(|[a, b]| Some([h.index_of(Level::Local, a)?, h.index_of(Level::Local, b)?]))
        .collect();
    for pc in lateral_confusion(&records, &pairs)? {
        let [a, b] = pc.pair;
        println!("{} <-> {}: {} confusions, worst unrelated pair {}", h.labels(Level::Local)[a], h.labels(Level::Local)[b], pc.within_pair, pc.max_unrelated);
    }

    let params = EconomicParams::preset(Role::Technologist);
    let curve = savings_curve(&report.threshold_sweep, &params)?;
    println!("\n{:>9} {:>6} {:>8} {:>12}", "threshold", "AP", "AP acc", "savings");
    for (row, money) in report.threshold_sweep.iter().zip(&curve).step_by(7) {
        let acc = row.ap_accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
        println!("{:>9.4} {:>6.3} {acc:>8} {:>12}", row.threshold, row.ap_fraction, money.savings.to_string());
    }

    let written = emit_report(&report, &out, ReportFormat::Both)?;
    println!("\nwrote {} files to {}", written.len(), out.display());
    Ok(())
}
