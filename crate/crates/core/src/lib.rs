//! Example-driven transformation of table columns and heterogeneous joins.
//!
//! A handful of `source -> target` example pairs describe how values in a
//! source column should be reformatted. Each source row is sent to a
//! [`predictor`] several times, each time with a different small context of
//! examples; the candidate outputs are combined by majority vote in
//! [`aggregate`], and the winning prediction is matched against a target
//! column by minimum edit distance in [`join`].
//!
//! ```
//! use tabxform::model::{CellValue, ExamplePair, ExampleSet};
//! use tabxform::predictor::{PredictorSpec, SynthesisConfig};
//! use tabxform::join::{join, JoinConfig};
//! use tabxform::rng::Seed;
//!
//! let examples = ExampleSet::new(vec![
//!     ExamplePair::new("Justin Trudeau", "jtrudeau"),
//!     ExamplePair::new("Stephen Harper", "sharper"),
//!     ExamplePair::new("Paul Martin", "pmartin"),
//! ])
//! .unwrap();
//! let sources = vec![CellValue::from("Jean Chretien")];
//! let targets: Vec<CellValue> = ["jtrudeau", "jchretien", "kcampbell"]
//!     .iter()
//!     .map(|t| CellValue::from(*t))
//!     .collect();
//! let specs = vec![PredictorSpec::Synthesis(SynthesisConfig::default())];
//! let out = join(&sources, &targets, &examples, &specs, 5, 2, &JoinConfig::default(), Seed(7))
//!     .unwrap();
//! assert_eq!(out.results[0].matches[0].target_index, 1);
//! assert_eq!(out.results[0].matches[0].distance, 0);
//! ```

pub mod aggregate;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod grammar;
pub mod join;
pub mod model;
pub mod predictor;
pub mod rng;
pub mod serializer;

pub use error::{Error, Result};
