use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use super::packet::{decode_packet, SensorPacket};
use super::WireError;

/// Receives one frame per datagram.
pub struct DatagramListener {
    socket: UdpSocket,
    buf: Vec<u8>,
}

impl DatagramListener {
    /// Binds `0.0.0.0:port`; port 0 picks an ephemeral port.
    pub fn bind(port: u16) -> Result<Self, WireError> {
        Self::bind_addr(SocketAddr::from(([0, 0, 0, 0], port)))
    }

    pub fn bind_addr(addr: SocketAddr) -> Result<Self, WireError> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(100)))?;
        Ok(DatagramListener {
            socket,
            buf: vec![0u8; 2048],
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, WireError> {
        Ok(self.socket.local_addr()?)
    }

    pub fn set_timeout(&self, timeout: Duration) -> Result<(), WireError> {
        self.socket.set_read_timeout(Some(timeout))?;
        Ok(())
    }

    /// Waits for one datagram. `Ok(None)` means the read timed out; a datagram
    /// that is not a valid frame comes back as the decode error.
    pub fn recv(&mut self) -> Result<Option<SensorPacket>, WireError> {
        match self.socket.recv_from(&mut self.buf) {
            Ok((n, _)) => decode_packet(&self.buf[..n]).map(Some),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
