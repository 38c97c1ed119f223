//! Quantum versus classical front end on identical data.

use std::fs;
use std::path::Path;

use super::config::TrainConfig;
use super::dataset::{prepare_dataset, Dataset, Split};
use super::persist::to_checkpoint;
use super::train::{evaluate_predictions, loss_history_csv, predict, train, MetricsReport};
use super::TOOL_VERSION;
use crate::error::{invalid, Result};
use crate::formats::{write_atomic, write_pgm};
use crate::image::Image2D;
use crate::nn::FrontEndKind;

/// Row labels of the comparison table.
pub const TABLE1_ROWS: [&str; 3] = ["MSE", "PSNR", "SSIM"];

/// Both arms at one acceleration.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub acceleration: f64,
    pub classical: MetricsReport,
    pub hybrid: MetricsReport,
    pub classical_history: Vec<f64>,
    pub hybrid_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub arms: Vec<ArmResult>,
}

/// Fails unless the two configs differ only in their front end.
pub fn check_arms_match(classical: &TrainConfig, hybrid: &TrainConfig) -> Result<()> {
    if classical.front_end != FrontEndKind::Classical || hybrid.front_end != FrontEndKind::Quantum {
        return invalid("comparison arms must be one classical and one quantum front end");
    }
    let a = classical.to_key_values();
    let b = hybrid.to_key_values();
    for ((key, va), (_, vb)) in a.iter().zip(b.iter()) {
        if key != "front_end" && va != vb {
            return invalid(format!("comparison arms differ in {key}: {va} vs {vb}"));
        }
    }
    Ok(())
}

fn arm_label(kind: &str, r: f64) -> String {
    format!("{kind}_{r}x")
}

impl ComparisonReport {
    /// `metric` column then `classical_<R>x,hybrid_<R>x` per acceleration.
    pub fn table1_csv(&self) -> String {
        let mut header = vec!["metric".to_string()];
        for arm in &self.arms {
            header.push(arm_label("classical", arm.acceleration));
            header.push(arm_label("hybrid", arm.acceleration));
        }
        let mut out = header.join(",") + "\n";
        for row in TABLE1_ROWS {
            let mut cells = vec![row.to_string()];
            for arm in &self.arms {
                for report in [&arm.classical, &arm.hybrid] {
                    let m = report.mean;
                    cells.push(match row {
                        "MSE" => format!("{:.8}", m.mse),
                        "PSNR" => format!("{:.4}", m.psnr),
                        _ => format!("{:.4}", m.ssim),
                    });
                }
            }
            out.push_str(&(cells.join(",") + "\n"));
        }
        out
    }

    pub fn zero_filled_csv(&self) -> String {
        let mut out = String::from("accel,mse,psnr,ssim\n");
        for arm in &self.arms {
            let m = arm.hybrid.zero_filled_mean;
            out.push_str(&format!("{},{:.8},{:.4},{:.4}\n", arm.acceleration, m.mse, m.psnr, m.ssim));
        }
        out
    }

    /// Both arms' per-image reports, concatenated without repeated headers.
    pub fn per_image_csv(&self) -> String {
        let mut out = format!("{}\n", MetricsReport::CSV_HEADER);
        for arm in &self.arms {
            for report in [&arm.classical, &arm.hybrid] {
                let csv = report.to_csv();
                let body = csv.split_once('\n').map_or("", |(_, rest)| rest);
                out.push_str(body);
            }
        }
        out
    }
}

fn abs_error(a: &Image2D, b: &Image2D) -> Image2D {
    Image2D::from_fn(a.height(), a.width(), |r, c| (a.get(r, c) - b.get(r, c)).abs())
}

fn write_panels(
    dir: &Path,
    r: f64,
    data: &Dataset,
    classical: &Image2D,
    hybrid: &Image2D,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let pair = &data.pairs[0];
    let panels = [
        ("ground_truth", pair.target.clone()),
        ("mask", data.mask_for(0).to_image()),
        ("zero_filled", pair.input.clone()),
        ("classical", classical.clone()),
        ("hybrid", hybrid.clone()),
        ("error_zero_filled", abs_error(&pair.input, &pair.target)),
        ("error_classical", abs_error(classical, &pair.target)),
        ("error_hybrid", abs_error(hybrid, &pair.target)),
    ];
    for (name, image) in panels {
        write_pgm(&image, &dir.join(format!("{r}x_{name}.pgm")))?;
    }
    Ok(())
}

/// Trains and evaluates both front ends at every `compare_accels` value
/// and writes the reports, loss curves, checkpoints and image panels
/// under `config.out_dir`. `progress` receives one line per finished stage.
pub fn compare(config: &TrainConfig, mut progress: impl FnMut(&str)) -> Result<ComparisonReport> {
    config.validate()?;
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    write_atomic(&out.join("resolved.cfg"), config.resolved_text().as_bytes())?;
    write_atomic(&out.join("VERSION"), format!("{TOOL_VERSION}\n").as_bytes())?;

    let mut arms = Vec::new();
    for &r in &config.compare_accels {
        let hybrid_cfg = TrainConfig { acceleration: r, front_end: FrontEndKind::Quantum, ..config.clone() };
        let classical_cfg = TrainConfig { front_end: FrontEndKind::Classical, ..hybrid_cfg.clone() };
        check_arms_match(&classical_cfg, &hybrid_cfg)?;

        let train_data = prepare_dataset(&hybrid_cfg, Split::Train)?;
        let test_data = prepare_dataset(&hybrid_cfg, Split::Test)?;
        progress(&format!("{r}x: prepared {} train / {} test pairs", train_data.len(), test_data.len()));

        let mut results = Vec::new();
        for (tag, cfg) in [("classical", &classical_cfg), ("hybrid", &hybrid_cfg)] {
            let mut outcome = train(cfg, &train_data)?;
            let predictions = predict(&mut outcome.network, &test_data)?;
            let report = evaluate_predictions(&predictions, &test_data, tag, r)?;
            let label = arm_label(tag, r);
            write_atomic(&out.join(format!("loss_{label}.csv")), loss_history_csv(&outcome.history).as_bytes())?;
            let ckpt = to_checkpoint(cfg, &mut outcome.network, &outcome.optimizer);
            fs::create_dir_all(out.join("checkpoints"))?;
            ckpt.write(&out.join("checkpoints").join(format!("{label}.qmrc")))?;
            progress(&format!(
                "{r}x {tag}: PSNR {:.4} dB, SSIM {:.4} (zero-filled {:.4} dB, {:.4})",
                report.mean.psnr, report.mean.ssim, report.zero_filled_mean.psnr, report.zero_filled_mean.ssim
            ));
            results.push((report, outcome.history, predictions));
        }
        let (hybrid, hybrid_history, hybrid_pred) = results.pop().expect("two arms");
        let (classical, classical_history, classical_pred) = results.pop().expect("two arms");
        write_panels(&out.join("panels"), r, &test_data, &classical_pred[0], &hybrid_pred[0])?;
        arms.push(ArmResult { acceleration: r, classical, hybrid, classical_history, hybrid_history });
    }

    let report = ComparisonReport { arms };
    write_atomic(&out.join("table1.csv"), report.table1_csv().as_bytes())?;
    write_atomic(&out.join("zero_filled.csv"), report.zero_filled_csv().as_bytes())?;
    write_atomic(&out.join("per_image.csv"), report.per_image_csv().as_bytes())?;
    Ok(report)
}
