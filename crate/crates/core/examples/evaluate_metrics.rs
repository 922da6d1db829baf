//! Per-class scores, macro averages and the per-category table for a small
//! set of hand-written predictions.
//!
//! ```bash
//! cargo run --example evaluate_metrics
//! ```

use finefact::evaluation::{balanced_accuracy, macro_f1, MetricReport};
use finefact::types::SystemCategory;
use finefact::{ErrorType, LabelVector};

fn main() -> finefact::Result<()> {
    let lv = LabelVector::from_mask;
    let gold = [lv(0b0001), lv(0b0011), lv(0), lv(0b1000), lv(0b0100), lv(0)];
    let pred = [lv(0b0001), lv(0b0001), lv(0b0100), lv(0b1000), lv(0), lv(0)];
    let cats = [
        SystemCategory::Sota,
        SystemCategory::Sota,
        SystemCategory::Old,
        SystemCategory::Old,
        SystemCategory::Xformer,
        SystemCategory::Xformer,
    ];

    for ty in ErrorType::ALL {
        println!(
            "{:<10} BACC {:.3}",
            ty.short_name(),
            balanced_accuracy(&pred, &gold, ty)?
        );
    }
    println!("macro F1 {:.3}\n", macro_f1(&pred, &gold)?);

    let report = MetricReport::compute(&pred, &gold, &cats)?;
    print!("{}", report.to_table());
    Ok(())
}
