//! Bistatic matched-filter imaging (in progress).
