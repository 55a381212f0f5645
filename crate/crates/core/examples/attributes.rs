//! Trains the beard / mustache / eyeglasses / mask classifiers on a 70/30
//! split of the bundled attribute corpus and prints held-out accuracy.
//!
//!     cargo run --release --example attributes [attrs_dir]

use doorwatch::description::{
    classify_attribute, load_attribute_corpus, train_attribute_model, Attribute, AttributeConfig,
};
use doorwatch::recognition::split_train_test;

fn main() -> anyhow::Result<()> {
    let root = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets/attrs").to_string());
    let config = AttributeConfig::default();
    for attr in Attribute::ALL {
        let samples = load_attribute_corpus(&root, attr, config.lbp.face_size)?;
        let (train, test) = split_train_test(&samples, |s| if s.present { "yes" } else { "no" }, 0.7, 2020);
        let model = train_attribute_model(attr, &train, &config)?;
        let mut correct = 0;
        for s in &test {
            if classify_attribute(&s.crop, &model)?.present == s.present {
                correct += 1;
            }
        }
        println!(
            "{:<10} {} train / {} test  training acc {:.3}  held-out acc {:.3}",
            attr.as_str(),
            train.len(),
            test.len(),
            model.training_accuracy(),
            correct as f64 / test.len() as f64
        );
    }
    Ok(())
}
