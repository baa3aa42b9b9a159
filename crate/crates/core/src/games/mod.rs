//! Game descriptions and their POHP-form views.

pub mod bundled;
pub mod efg;
pub mod form;
pub mod gadget;
pub mod markov;

pub use efg::{GameBuilder, GameDescription};
pub use form::{efg_to_pohp_form, EfgAgent, EfgState, GameObs, PohpFormGame, Seat, SeatData, SeatView, Signal};
pub use markov::{markov_to_pohp_form, MarkovModel, Observability};
