pub mod bvh;
pub mod design;
pub mod dither;
pub mod expr;
pub mod fea;
pub mod fractions;
pub mod geom;
pub mod grading;
pub mod inp;
pub mod lattice;
pub mod material;
pub mod meshing;
pub mod narrowband;
pub mod simfield;
pub mod surface;
pub mod voxel;
pub mod workers;
