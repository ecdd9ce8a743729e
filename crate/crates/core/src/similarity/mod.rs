//! Exact nearest neighbours and k-means over profile vectors.

mod kmeans;
mod knn;

pub use kmeans::{kmeans, kmeans_restarts, select_k, silhouette, ClusterModel, KMeansFit, RESTARTS};
pub use knn::{knn, squared_distance};
