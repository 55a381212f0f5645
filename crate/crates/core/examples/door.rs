//! Drives the simulated relay switch over TCP: a timed unlock that closes
//! on its own, then an unlock whose controller goes silent, so the switch
//! watchdog has to drop the relay.
//!
//!     cargo run --example door

use std::sync::Arc;
use std::time::{Duration, Instant};

use doorwatch::door::{CommandKind, DeviceConfig, DeviceSim, DoorCommand, DoorController, TcpLink};

fn main() -> anyhow::Result<()> {
    let sim = DeviceSim::spawn(&DeviceConfig {
        address: "127.0.0.1:0".into(),
        shared_secret: "example-secret".into(),
        watchdog_seconds: 1.5,
    })?;
    let link = Arc::new(TcpLink::new(sim.addr().to_string(), "example-secret", Duration::from_secs(1)));
    let door = DoorController::new(link, 300);
    let t0 = Instant::now();
    let now = || t0.elapsed().as_millis() as u64;

    let s = door.command(&DoorCommand::new(CommandKind::Unlock { duration_s: 1 }, "c1", "example"), now())?;
    println!("{:>5} ms unlock 1s -> {:?}, deadline {:?}, relay {}", now(), s.lock, s.auto_close_deadline, sim.relay().as_str());
    let again = door.command(&DoorCommand::new(CommandKind::Unlock { duration_s: 1 }, "c1", "example"), now())?;
    println!("{:>5} ms same command id again -> deadline {:?}", now(), again.auto_close_deadline);
    while !door.tick(now()).is_locked() {
        std::thread::sleep(Duration::from_millis(50));
    }
    println!("{:>5} ms auto-close, relay {}", now(), sim.relay().as_str());

    door.command(&DoorCommand::new(CommandKind::Unlock { duration_s: 60 }, "c2", "example"), now())?;
    println!("{:>5} ms unlock 60s, relay {}; controller stops ticking", now(), sim.relay().as_str());
    let silent = Instant::now();
    while sim.relay().as_str() != "off" {
        std::thread::sleep(Duration::from_millis(20));
    }
    println!(
        "{:>5} ms switch watchdog dropped the relay after {} ms of silence",
        now(),
        silent.elapsed().as_millis()
    );
    let (state, relay) = door.reconcile(now())?;
    println!("{:>5} ms reconciled: controller {:?}, relay {}", now(), state.lock, relay.as_str());
    sim.shutdown();
    Ok(())
}
