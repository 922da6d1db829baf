//! Compares back-propagated gradients of the full detector loss with
//! central finite differences for a few parameters of every module.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use finefact::params::GradBuffer;
use finefact::srl::{extract_corpus, FrameIndex};
use finefact::synthetic::{alignment_task, fixture_backend};
use finefact::training::{example_loss, ClassWeights};
use finefact::{FactModel, ModelConfig};

fn main() -> finefact::Result<()> {
    let sample = alignment_task(1, 3, 4).remove(0);
    let frames = FrameIndex::from_records(
        extract_corpus(std::slice::from_ref(&sample), &fixture_backend())?.0,
    );
    let mut model = FactModel::new(ModelConfig::toy(8, 2), 1)?;
    let ex = model
        .prepare_examples(std::slice::from_ref(&sample), &frames)?
        .remove(0);
    let weights = ClassWeights {
        beta: [0.5, 1.5, 1.0, 2.0],
    };

    let mut buf = GradBuffer::new(&model.store);
    example_loss(&model, &ex, None, &weights, Some((&mut buf, 1.0)))?;

    let names = [
        "classifier.weight",
        "fact_attention.query.weight",
        "pooler.phi.0.weight",
        "pooler.score.weight",
        "encoder.layer1.adapter.ffn.up.weight",
    ];
    let h = 1e-5;
    for name in names {
        let id = model.store.id(name).expect("parameter exists");
        let analytic = buf.get(id).map(|g| g[[0, 0]]).unwrap_or(0.0);
        let orig = model.store.value(id)[[0, 0]];
        model.store.value_mut(id)[[0, 0]] = orig + h;
        let up = example_loss(&model, &ex, None, &weights, None)?;
        model.store.value_mut(id)[[0, 0]] = orig - h;
        let down = example_loss(&model, &ex, None, &weights, None)?;
        model.store.value_mut(id)[[0, 0]] = orig;
        let numeric = (up - down) / (2.0 * h);
        println!("{name:<40} analytic {analytic:+.6e}  numeric {numeric:+.6e}");
    }
    Ok(())
}
