//! Pixel-wise annotation of web GUI elements.
//!
//! The pipeline isolates each element in a browser, captures it under
//! controlled recolorings, and inverts source-over composition to recover a
//! straight-alpha BGRA bitmap per element ([`derive`]). Pairwise stacking
//! analysis yields a minimum composition layering ([`layers`]), from which
//! visible-area masks, outer contours and bounding boxes follow
//! ([`annotate`]). A seeded scene generator ([`synth`]) provides ground truth
//! for every stage without a browser.

pub mod annotate;
pub mod capture;
pub mod codec;
pub mod compositor;
pub mod config;
pub mod dataset;
pub mod derive;
pub mod error;
pub mod layers;
pub mod model;
pub mod raster;
pub mod synth;

pub use annotate::{annotate_scene, derive_mask, min_bbox, trace_contours, AnnotationSet, BBox, Contour, Mask, MaskThreshold};
pub use compositor::{composite_over, render_excluding, render_scene};
pub use derive::{compute_white_mask, derive_graphic, derive_text, DerivationConfig, GraphicGroup, TextGroup, WhiteMask};
pub use error::{Error, Result};
pub use layers::{assign_layers, build_stack_graph, compare_stack_order, overlap, validate_layering, Layering, StackGraph, StackOrder};
pub use model::{validate_scene, ElementBitmap, ElementId, ElementMeta, NodeKind, Scene, SceneElement, ValidationReport, ZIndex};
pub use raster::{Bgr, Bgra, BitMask, Image, Rect};
pub use synth::{synth_scene, SynthParams, Synthesized};
