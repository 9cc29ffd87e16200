//! Published reference scores displayed alongside toolkit output.
//!
//! These are the headline numbers of the whispered-speech recognition study
//! this toolkit's evaluation protocol follows: a fine-tuned 94.7M-parameter
//! self-supervised model on licensed corpora, decoded two ways, against an
//! off-the-shelf large ASR baseline. Nothing at desk scale reproduces them —
//! score reports print them strictly as context, labeled
//! "paper reference (not reproduced here)", and no test asserts toolkit
//! output against them.

use serde::Serialize;

/// A WER/CER pair in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceScore {
    pub wer_percent: f64,
    pub cer_percent: f64,
}

/// Off-the-shelf large-model baseline on normal speech.
pub const BASELINE_NORMAL: ReferenceScore = ReferenceScore {
    wer_percent: 16.69,
    cer_percent: 3.81,
};

/// Off-the-shelf large-model baseline on whispered speech.
pub const BASELINE_WHISPERED: ReferenceScore = ReferenceScore {
    wer_percent: 18.80,
    cer_percent: 4.24,
};

/// Fine-tuned system, greedy decoding, whispered test set.
pub const FINETUNED_GREEDY: ReferenceScore = ReferenceScore {
    wer_percent: 9.28,
    cer_percent: 2.60,
};

/// Fine-tuned system, beam decoding, whispered test set.
pub const FINETUNED_BEAM: ReferenceScore = ReferenceScore {
    wer_percent: 9.22,
    cer_percent: 2.59,
};

/// Caveat string attached wherever the constants are displayed.
pub const REFERENCE_NOTE: &str = "paper reference (not reproduced here)";

/// All reference rows with display labels, in report order.
pub fn reference_table() -> Vec<(&'static str, ReferenceScore)> {
    vec![
        ("baseline normal", BASELINE_NORMAL),
        ("baseline whispered", BASELINE_WHISPERED),
        ("fine-tuned greedy", FINETUNED_GREEDY),
        ("fine-tuned beam", FINETUNED_BEAM),
    ]
}
