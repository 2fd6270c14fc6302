//! Wire format, channels and the relayed secure channel.

pub mod codec;
pub mod envelope;
pub mod secure;
pub mod sim;
pub mod tcp;

pub use codec::{deserialize_ring_element, serialize_ring_element, Reader, Writer};
pub use envelope::{Envelope, MsgType, HEADER_LEN, MAX_PAYLOAD, SERVER_ID, WIRE_VERSION};
pub use secure::{secure_unwrap, secure_wrap, KeyId, SecureBlob, TransportKeypair};
pub use sim::{simulate_network, Delivery, DropPattern, LatencyModel, Network, Node, Schedule};
