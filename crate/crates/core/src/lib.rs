pub mod ccss;
pub mod coverage;
pub mod cdclt;
pub mod model;
pub mod preprocess;
pub mod sample_io;
pub mod sampler;
pub mod smtlib;
pub mod theory;
