//! Trains the PICO labeler on the bundled annotations, evaluates it on the
//! held-out split and labels a new abstract.
//!
//! ```bash
//! cargo run -p litscope --example pico_labeling
//! ```

use litscope::fixtures;
use litscope::pico::{self, conll, evaluate, tokenize, TrainConfig};
use litscope::vocab::Tagger;

fn main() -> litscope::Result<()> {
    let model = pico::train(&fixtures::pico_train(), &TrainConfig::default())?;
    println!("{} features", model.num_features());

    let test = fixtures::pico_test();
    let gold: Vec<_> = test.iter().map(|s| s.labels.clone()).collect();
    let pred: Vec<_> = test.iter().map(|s| model.decode(&s.tokens)).collect();
    let eval = evaluate(&gold, &pred)?;
    for (cat, s) in &eval.per_category {
        println!("{cat:?}: P {:.2} R {:.2} F1 {:.2}", s.precision, s.recall, s.f1);
    }
    println!("micro F1 {:.3}", eval.micro.f1);

    let text = "We randomized 120 adults with COVID-19 pneumonia to remdesivir or placebo; \
                mortality and time to recovery were recorded.";
    let labels = model.decode(&tokenize(text));
    let spans = pico::labels_to_spans(text, &tokenize(text), &labels)?;
    println!("\n{}", conll::to_markup(text, &spans));

    let tagger = Tagger::new(&fixtures::vocabulary());
    for c in pico::concepts_in_spans(&tagger, text, &spans) {
        println!("  {:?} {}", c.category, c.concept_id);
    }
    Ok(())
}
