//! Exports an encoder backbone and a WordPiece vocabulary, then builds an
//! adapter-encoder detector on top of them. Only the adapters and the
//! detector layers are trainable.
//!
//! ```bash
//! cargo run --example adapter_backbone
//! ```

use finefact::checkpoint::write_params;
use finefact::encoder::EncoderConfig;
use finefact::params::ParamStore;
use finefact::{FactModel, ModelConfig};

fn main() -> finefact::Result<()> {
    let dir = std::env::temp_dir().join("finefact-adapter");
    std::fs::create_dir_all(&dir).map_err(|e| finefact::Error::io(&dir, e))?;

    let vocab: Vec<String> = [
        "[PAD]", "[CLS]", "[SEP]", "[UNK]", "the", "farmer", "sold", "horse", "##s", ".",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let vocab_path = dir.join("vocab.txt");
    std::fs::write(&vocab_path, vocab.join("\n"))
        .map_err(|e| finefact::Error::io(&vocab_path, e))?;

    let mut enc = EncoderConfig::adapter_base(dir.join("backbone.bin"), vocab_path);
    enc.hidden = 16;
    enc.ffn = 32;
    enc.heads = 2;
    enc.layers = 2;
    enc.adapter_dim = 4;
    enc.vocab_size = vocab.len();
    let mut cfg = ModelConfig::toy(16, 2);
    cfg.encoder = enc;

    // Any model with the same encoder shapes can supply the backbone.
    let donor = finefact::model::FactModel::new(
        ModelConfig {
            encoder: EncoderConfig {
                kind: finefact::encoder::EncoderKind::Toy,
                ..cfg.encoder.clone()
            },
            ..cfg.clone()
        },
        42,
    )?;
    let mut backbone = ParamStore::new();
    for (_, p) in donor
        .store
        .iter()
        .filter(|(_, p)| p.name.starts_with("encoder."))
    {
        backbone.add(p.name.clone(), p.value.clone(), false);
    }
    write_params(&dir.join("backbone.bin"), &backbone)?;

    let model = FactModel::new(cfg, 0)?;
    println!(
        "{} parameters, {} trainable",
        model.store.num_scalars(),
        model.store.num_trainable_scalars()
    );
    println!("{:?}", model.tokenizer().encode_word("horses"));
    Ok(())
}
