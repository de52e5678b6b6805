//! Generator and discriminator networks.

mod blocks;
mod config;
mod discriminator;
mod generator;

pub use blocks::{ConvBlock, ConvBlockTape, DeconvBlock, DeconvBlockTape};
pub use config::{DiscriminatorConfig, GeneratorConfig};
pub use discriminator::{Discriminator, DiscriminatorTape};
pub use generator::{GeneratorOutput, Generator, GeneratorTape};
