//! Scores a generated comment against a reference with BLEU, ROUGE-1 and
//! BERTScore (mock embedder).
//!
//! cargo run --example score_comments -- "generated text" "reference text"

use smartdoc::metrics::{bertscore, bleu, normalize, rouge1, MockEmbedder};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let generated = args.next().unwrap_or_else(|| "/** Returns the total price of all items in the order. */".into());
    let reference =
        args.next().unwrap_or_else(|| "/** Computes the order total by summing item prices. @return the total */".into());

    let hyp = normalize(&generated, true);
    let refs = normalize(&reference, true);
    println!("hyp tokens: {}", hyp.join(" "));
    println!("ref tokens: {}", refs.join(" "));

    let b = bleu(&hyp, std::slice::from_ref(&refs));
    let r = rouge1(&hyp, &refs);
    let s = bertscore(&hyp, &refs, &MockEmbedder::default()).await?;
    println!("BLEU       {b:.4}");
    println!("ROUGE-1    P {:.4}  R {:.4}  F1 {:.4}", r.precision, r.recall, r.f1);
    println!("BERTScore  P {:.4}  R {:.4}  F1 {:.4}", s.precision, s.recall, s.f1);
    Ok(())
}
