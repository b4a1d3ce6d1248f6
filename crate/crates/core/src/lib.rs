pub mod bilinear;
pub mod comms;
pub mod ibsc;
pub mod keyagree;
pub mod ledger;
