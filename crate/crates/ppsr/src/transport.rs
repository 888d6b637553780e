//! Loopback TCP transport. Frames on the wire are byte-identical to the
//! in-process path: the session handlers produce and consume full frames,
//! and this module only moves them across a socket.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};

use ppsr_core::protocol::{
    AliceSession, BobSession, CandidateList, ProtocolError, ProtocolTranscript, WIRE_MAGIC,
    WIRE_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer thread panicked")]
    PeerPanic,
}

pub fn write_frame(stream: &mut TcpStream, frame: &[u8]) -> Result<(), TransportError> {
    stream.write_all(frame)?;
    stream.flush()?;
    Ok(())
}

/// Read one framed message: 7-byte header (magic, version, type, 4-byte
/// big-endian length), then the payload. Returns the full frame bytes.
pub fn read_frame(stream: &mut TcpStream) -> Result<Vec<u8>, TransportError> {
    let mut header = [0u8; 7];
    stream.read_exact(&mut header)?;
    if header[0] != WIRE_MAGIC {
        return Err(ProtocolError::Framing("bad magic").into());
    }
    if header[1] != WIRE_VERSION {
        return Err(ProtocolError::Framing("unsupported version").into());
    }
    let len = u32::from_be_bytes([header[3], header[4], header[5], header[6]]) as usize;
    let mut frame = header.to_vec();
    frame.resize(7 + len, 0);
    stream.read_exact(&mut frame[7..])?;
    Ok(frame)
}

/// Run one session over a fresh loopback socket: Bob serves, Alice connects.
/// Returns the same (list, transcript) the in-process driver would.
pub fn run_protocol_tcp(
    mut alice: AliceSession,
    mut bob: BobSession,
) -> Result<(CandidateList, ProtocolTranscript), TransportError> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;

    let bob_side = std::thread::spawn(move || -> Result<BobSession, TransportError> {
        let (mut stream, _) = listener.accept()?;
        let m1 = bob.send_similarities()?;
        write_frame(&mut stream, &m1)?;
        let m2 = read_frame(&mut stream)?;
        let m3 = bob.rank_degrees(&m2)?;
        write_frame(&mut stream, &m3)?;
        Ok(bob)
    });

    let run_alice = |alice: &mut AliceSession| -> Result<CandidateList, TransportError> {
        let mut stream = TcpStream::connect(addr)?;
        let m1 = read_frame(&mut stream)?;
        let m2 = alice.compute_degrees(&m1)?;
        write_frame(&mut stream, &m2)?;
        let m3 = read_frame(&mut stream)?;
        Ok(alice.resolve_order(&m3)?)
    };
    let list = run_alice(&mut alice);
    let bob = bob_side.join().map_err(|_| TransportError::PeerPanic)??;
    let list = list?;
    let transcript = ProtocolTranscript::assemble(
        bob.events().to_vec(),
        alice.events().to_vec(),
        bob.degenerate(),
    );
    Ok((list, transcript))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use ppsr_core::paillier::{keygen, FixedPointCodec};
    use ppsr_core::protocol::{run_protocol, validate_transcript, RankMatrix};
    use rand::SeedableRng;

    fn setup(seed: u64) -> (AliceSession, BobSession) {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(900);
        let keypair = keygen(512, &mut rng).unwrap();
        let codec = FixedPointCodec::default();
        let table = vec![(1, 0.75), (2, 0.25), (3, 0.5)];
        let rank = RankMatrix::new(
            Array2::from_shape_vec(
                (4, 5),
                vec![0, 0, 0, 0, 0, 5, 0, 3, 1, 2, 2, 4, 0, 0, 1, 1, 1, 1, 5, 0],
            )
            .unwrap(),
            5,
        )
        .unwrap();
        let bob = BobSession::new(keypair, table, codec, seed);
        let alice = AliceSession::new(rank, 0, codec.scale(), seed + 1).unwrap();
        (alice, bob)
    }

    #[test]
    fn socket_and_in_process_runs_are_identical() {
        let (mut alice_a, mut bob_a) = setup(11);
        let (in_process_list, in_process_transcript) =
            run_protocol(&mut alice_a, &mut bob_a).unwrap();

        let (alice_b, bob_b) = setup(11);
        let (socket_list, socket_transcript) = run_protocol_tcp(alice_b, bob_b).unwrap();

        assert_eq!(in_process_list, socket_list);
        assert_eq!(in_process_transcript, socket_transcript);
        validate_transcript(&socket_transcript).unwrap();
    }
}
