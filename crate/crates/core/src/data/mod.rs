//! EDF recordings, CHB-MIT annotation summaries, channel selection and a
//! synthetic EEG generator.

pub mod channels;
pub mod corpus;
pub mod edf;
pub mod summary;
pub mod synth;

pub use channels::{default_channels, normalize_label, Recording, DEFAULT_CHANNELS};
pub use corpus::{CaseCatalog, Corpus, RecordingRef, EXCLUDED_FILES};
pub use edf::{digital_to_physical, parse_edf, parse_edf_header, physical_to_digital, write_edf, EdfFile, EdfHeader, SignalSpec};
pub use summary::{parse_chbmit_summary, write_chbmit_summary, SeizureAnnotation};
pub use synth::{place_seizures, synth_eeg, write_synth_corpus, SynthConfig, SynthCorpusConfig};
