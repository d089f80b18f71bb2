//! Skeleton-based action recognition: joint sequences are encoded as small
//! color images and classified with residual networks trained from scratch.

pub mod augment;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod nn;
pub mod raster;
pub mod resnet;

pub use augment::{augment_all, eval_view, AugmentPolicy, CropMode, Variant};
pub use dataset::{
    make_split, parse_corpus, CorpusLayout, DatasetId, Experiment, Joint, ProtocolSpec,
    SequenceId, SkeletonFrame, SkeletonSequence, Split, SplitRule, Subset,
};
pub use encoder::{encode, PartMap, ENCODED_SIZE};
pub use error::{Error, Result};
pub use harness::{ExperimentResult, LabeledImages, RunConfig, TrainConfig};
pub use nn::{Mode, Tensor};
pub use raster::Image;
pub use resnet::{ResNet, ResNetConfig};
