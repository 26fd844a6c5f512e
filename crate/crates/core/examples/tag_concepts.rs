//! Dictionary tagging: leftmost-longest matches, variant unification and
//! the analysis-term filter.
//!
//! ```bash
//! cargo run -p litscope --example tag_concepts -- "Severe diarrhea and bloating in children"
//! ```

use litscope::fixtures;
use litscope::vocab::Tagger;

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Severe diarrhea, swelling of abdomen and bloating were reported after ventilation.".into());
    let vocab = fixtures::vocabulary();
    let tagger = Tagger::new(&vocab);
    let stop = fixtures::stoplist();

    println!("{text}");
    for occ in tagger.tag(&text) {
        let concept = vocab.concept(&occ.concept_id).unwrap();
        let note = if stop.contains(&occ.surface) { " (stopword)" } else { "" };
        println!(
            "  {:>3}..{:<3} {:<22} {} {}{note}",
            occ.span.0,
            occ.span.1,
            occ.surface,
            occ.concept_id,
            concept.preferred_term
        );
    }
}
