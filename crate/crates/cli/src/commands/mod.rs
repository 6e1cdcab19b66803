pub mod clean;
pub mod evaluate;
pub mod factor;
pub mod fit_caw;
pub mod fit_var;
pub mod forecast;
pub mod rcov;
pub mod simulate;
