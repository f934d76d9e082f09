//! Image I/O, resizing, histogram matching, paired-image layout and
//! group-aware dataset splitting.

mod histogram;
mod pairing;
mod raster;
mod resize;
mod split;

pub use histogram::{cdf_sup_distance, channel_histograms, histogram_match};
pub use pairing::{pair_side_by_side, random_crop_pair, unpair, PairedSample};
pub use raster::{load_image, quantize, save_png, RasterImage, CHANNELS};
pub use resize::resize_bicubic;
pub use split::{split_by_group, split_samples, DatasetManifest, ManifestEntry, Split};
