pub mod arith;
pub mod characters;
pub mod charsums;
pub mod equidist;
pub mod field;
pub mod formulas;
pub mod geometry;
pub mod measure;
pub mod theta;
