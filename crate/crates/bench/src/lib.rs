//! Fixture programs shared by the benchmarks.

use islab_core::{InstructionSequence, Specification};

/// Copy program with the test polarity flipped.
pub const FLIPPED_COPY: &str = "-i.get; #3; o.set:0; !; o.set:1; !";

/// Needs two disjoint repairs to meet `o=i`.
pub const TWO_FAULTS: &str = "#1; #1; o.set:0; !; o.set:0; !";

/// Backward loop over two toggling registers; halts when `b` reads 0.
pub const LOOPING: &str = "a.set:0; +a.negate; #2; \\#2; +b.negate; \\#4; !";

pub fn program(text: &str) -> InstructionSequence {
    InstructionSequence::parse(text).expect("fixture program parses")
}

/// Straight-line program of `n` register writes followed by a halt.
pub fn straight_line(n: usize) -> InstructionSequence {
    let body: Vec<String> = (0..n).map(|k| format!("r{}.negate", k % 4)).collect();
    program(&format!("{}; !", body.join("; ")))
}

pub fn copy_spec() -> Specification {
    Specification::copy("o", "i")
}
