//! Fleiss' kappa over a seed annotation sheet, with the 0.6 gate.
//!
//!     cargo run --example annotation_agreement

use personaflag::dataset::{annotation_gate, fleiss_kappa, AnnotationMatrix};

const SHEET: &str = "sentence,ann1,ann2,ann3
He cannot hold a real job.,stereotype_downsyndrome,stereotype_downsyndrome,stereotype_downsyndrome
She takes the bus to class.,neutral,neutral,neutral
They are always so sweet.,stereotype_downsyndrome,stereotype_downsyndrome,neutral
His sister helps with homework.,neutral,neutral,neutral
She will never understand money.,stereotype_downsyndrome,stereotype_downsyndrome,stereotype_downsyndrome
";

fn main() -> personaflag::Result<()> {
    let m = AnnotationMatrix::read_delimited(SHEET.as_bytes(), b',')?;
    println!("{} items, {} annotators, categories {:?}", m.items.len(), m.annotators, m.categories);
    println!("kappa = {:.4}", fleiss_kappa(&m)?);
    match annotation_gate(&m, false) {
        Ok(k) => println!("gate passed ({k:.4})"),
        Err(e) => println!("gate failed: {e}"),
    }
    Ok(())
}
