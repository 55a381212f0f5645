use std::sync::Arc;
use std::time::{Duration, Instant};

use doorwatch::door::{
    CommandKind, DeviceConfig, DeviceSim, DoorCommand, DoorController, Lock, RelayState, TcpLink,
};

fn sim(watchdog_seconds: f64) -> doorwatch::door::DeviceHandle {
    DeviceSim::spawn(&DeviceConfig {
        address: "127.0.0.1:0".into(),
        shared_secret: "k".into(),
        watchdog_seconds,
    })
    .unwrap()
}

fn unlock(id: &str, s: u32) -> DoorCommand {
    DoorCommand::new(CommandKind::Unlock { duration_s: s }, id, "test")
}

fn wait_for(mut ok: impl FnMut() -> bool, limit: Duration) -> bool {
    let t = Instant::now();
    while t.elapsed() < limit {
        if ok() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    false
}

#[test]
fn wrong_secret_is_rejected_and_stays_locked() {
    let dev = sim(30.0);
    let link = Arc::new(TcpLink::new(dev.addr().to_string(), "guess", Duration::from_secs(1)));
    let door = DoorController::new(link, 500);
    assert!(door.command(&unlock("a", 5), 0).is_err());
    assert_eq!(door.state().lock, Lock::Locked);
    assert_eq!(dev.relay(), RelayState::Off);
    assert_eq!(dev.rejected(), 1);
}

#[test]
fn timed_unlock_closes_on_the_tick_after_its_deadline() {
    let dev = sim(30.0);
    let door = DoorController::new(
        Arc::new(TcpLink::new(dev.addr().to_string(), "k", Duration::from_secs(1))),
        500,
    );
    let s = door.command(&unlock("a", 2), 10_000).unwrap();
    assert_eq!(s.auto_close_deadline, Some(12_000));
    assert_eq!(dev.relay(), RelayState::On);
    assert_eq!(door.tick(11_999).lock, Lock::Unlocked);
    assert_eq!(door.tick(12_000).lock, Lock::Locked);
    assert_eq!(dev.relay(), RelayState::Off);
}

#[test]
fn silent_controller_is_overruled_by_the_watchdog() {
    let dev = sim(0.3);
    let door = DoorController::new(
        Arc::new(TcpLink::new(dev.addr().to_string(), "k", Duration::from_secs(1))),
        100,
    );
    door.command(&unlock("a", 60), 0).unwrap();
    assert_eq!(dev.relay(), RelayState::On);
    assert!(wait_for(|| dev.relay() == RelayState::Off, Duration::from_secs(3)));
    let (state, relay) = door.reconcile(1_000).unwrap();
    assert_eq!((state.lock, relay), (Lock::Locked, RelayState::Off));
}

#[test]
fn heartbeats_keep_a_long_unlock_open() {
    let dev = sim(0.4);
    let door = DoorController::new(
        Arc::new(TcpLink::new(dev.addr().to_string(), "k", Duration::from_secs(1))),
        100,
    );
    let t0 = Instant::now();
    let now = || t0.elapsed().as_millis() as u64;
    door.command(&unlock("a", 2), now()).unwrap();
    while now() < 1_200 {
        door.tick(now());
        assert_eq!(dev.relay(), RelayState::On, "dropped at {} ms", now());
        std::thread::sleep(Duration::from_millis(30));
    }
    while !door.tick(now()).is_locked() {
        std::thread::sleep(Duration::from_millis(30));
    }
    assert!(now() >= 2_000 && now() < 2_300, "{}", now());
    assert_eq!(dev.relay(), RelayState::Off);
}

#[test]
fn unreachable_switch_refuses_to_unlock() {
    let dev = sim(30.0);
    let addr = dev.addr().to_string();
    dev.shutdown();
    let door = DoorController::new(Arc::new(TcpLink::new(addr, "k", Duration::from_millis(200))), 100);
    assert!(door.command(&unlock("a", 5), 0).is_err());
    assert_eq!(door.state().lock, Lock::Locked);
}
