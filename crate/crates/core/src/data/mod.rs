//! Dataset ingestion: IDX tensors, semi-supervised label masking and the
//! synthetic-dataset binary container.

pub mod container;
pub mod idx;
pub mod split;

pub use container::{read_container, write_container};
pub use idx::{read_idx, write_idx, IdxData, IdxTensor};
pub use split::{binary_mnist, make_ssl_split, SplitSpec};
