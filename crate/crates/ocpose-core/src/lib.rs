//! Evaluation of multi-person pose estimation.
//!
//! The headline metric matches detected poses against GT poses, instance
//! masks, and crowd masks by solving an exact optimal-transport problem over
//! pair costs `1 - OKS`, pricing unmatched detections and unmatched GTs at 1
//! through dummy nodes. Unlike ranked average precision it weighs every
//! detection equally, so flooding an image with low-confidence false
//! positives raises the score instead of leaving it untouched.
//!
//! A confidence-ranked keypoint mAP baseline, threshold sweeps, PR-curve
//! emission, and synthetic fixtures round out the toolkit; the `ocpose` CLI
//! in the companion crate drives it all from COCO-format files.
//!
//! ```
//! use ocpose_core::dataset::{generate_scenes, SigmaTable, SynthSpec};
//! use ocpose_core::pipeline::{evaluate_scenes, EvalOptions};
//!
//! // two images, five GT poses each, plus three junk detections per image
//! let spec = SynthSpec {
//!     images: 2,
//!     gt_poses: 5,
//!     far_fps: 3,
//!     fp_score: 0.05,
//!     seed: 7,
//!     ..Default::default()
//! };
//! let scenes = generate_scenes(&spec, &SigmaTable::coco17()).unwrap();
//! let report = evaluate_scenes(&scenes, &EvalOptions::default());
//!
//! // ranked AP never notices the junk; the transport score pays for it
//! assert_eq!(report.aggregate.map, 1.0);
//! assert_eq!(report.aggregate.ocpose_pooled, 6.0 / 16.0);
//! assert_eq!(report.aggregate.total_fp, 6);
//! ```

pub mod dataset;
pub mod error;
pub mod mask;
pub mod matcher;
pub mod pipeline;
pub mod ranking;
pub mod report;
pub mod similarity;

pub use error::{Error, Result};
