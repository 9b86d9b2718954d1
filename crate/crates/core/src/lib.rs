pub mod dynamics;
pub mod expr;
pub mod geom;
pub mod newton;
pub mod fixed_points;
pub mod index;
pub mod symmetry;
pub mod manifolds;
pub mod flows;
pub mod certify;
pub mod cli;
