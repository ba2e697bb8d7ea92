//! Shared fixtures for the benchmarks.

use soilsamp::synth::{generate_site, SiteSpec};
use soilsamp::terrain::{features_from_dem, FeatureMatrix};
use soilsamp::{ClassMap, RasterGrid};

/// DEM, reference classes and feature matrix of the default synthetic site.
pub fn default_site() -> (RasterGrid, ClassMap, FeatureMatrix) {
    let (dem, classes) = generate_site(&SiteSpec::default()).expect("default spec is valid");
    let (_, fm) = features_from_dem(&dem).expect("default DEM is large enough");
    (dem, classes, fm)
}
