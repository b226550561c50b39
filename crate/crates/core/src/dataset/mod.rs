//! Training corpus construction: MGSD import, seed annotation agreement,
//! seed expansion and train/test assembly.

pub mod assemble;
pub mod augment;
pub mod kappa;
pub mod mgsd;

pub use assemble::{assemble, AssemblyReport};
pub use augment::{augment, AugmentError, AugmentationJob, PartialAugmentation};
pub use kappa::{annotation_gate, fleiss_kappa, AnnotatedItem, AnnotationMatrix, SUBSTANTIAL_AGREEMENT};
pub use mgsd::{import_mgsd, simplify_mgsd, ImportReport, MgsdCategory, MgsdRecord};

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::label::LabeledExample;

/// Reads one [`LabeledExample`] per line, validating each.
pub fn read_examples<R: BufRead>(input: R) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: LabeledExample =
            serde_json::from_str(&line).map_err(|err| Error::invalid(format!("line {}: {err}", i + 1)))?;
        e.validate()?;
        out.push(e);
    }
    Ok(out)
}

pub fn write_examples<W: Write>(examples: &[LabeledExample], mut out: W) -> Result<()> {
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
