//! Prints positional, absolute and relative length encodings for one
//! target length, the rows a decoder sees as it writes characters.

use lenctl::encodings::{dump_table, quantize, CharCursor, EncodingSpec, Variant};

fn main() -> lenctl::Result<()> {
    let len = 12;
    for variant in [Variant::Pe, Variant::LeAbs, Variant::LeRel] {
        let spec = EncodingSpec::new(6, variant)?;
        print!("{}", dump_table(&spec, len, len)?);
        println!();
    }
    let levels: Vec<usize> = (0..=len).map(|p| quantize(CharCursor::new(p, len), 5)).collect();
    println!("relative levels over pos 0..={len}: {levels:?}");
    Ok(())
}
