//! Dataset records, the filtered label vocabulary and multi-hot targets.

mod record;
mod vocab;

pub use record::{read_dataset, write_dataset, ProductRecord};
pub use vocab::{
    build_vocabulary, encode_labels, filter_records, read_vocabulary, split_train_test,
    write_vocabulary, LabelVocabulary, MultiHot,
};
