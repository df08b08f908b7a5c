use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use super::{Backend, ChatMessage, LmError, ModelRole, ModelRoleConfig};

pub const DEFAULT_IN_FLIGHT: usize = 4;

/// Routes each model role to its backend, caps concurrent calls and counts
/// calls per role.
pub struct Gateway {
    backends: [Arc<dyn Backend>; 3],
    configs: [ModelRoleConfig; 3],
    cap: usize,
    // (in flight now, highest seen)
    in_flight: Mutex<(usize, usize)>,
    freed: Condvar,
    calls: [AtomicU64; 3],
}

impl Gateway {
    /// One backend serving every role under the same model name.
    pub fn new(backend: Arc<dyn Backend>, model_name: &str) -> Self {
        Self {
            backends: [backend.clone(), backend.clone(), backend],
            configs: ModelRole::ALL.map(|r| ModelRoleConfig::new(r, model_name)),
            cap: DEFAULT_IN_FLIGHT,
            in_flight: Mutex::new((0, 0)),
            freed: Condvar::new(),
            calls: Default::default(),
        }
    }

    pub fn with_role(mut self, backend: Arc<dyn Backend>, cfg: ModelRoleConfig) -> Self {
        let i = cfg.role.index();
        self.backends[i] = backend;
        self.configs[i] = cfg;
        self
    }

    pub fn with_in_flight_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn config(&self, role: ModelRole) -> &ModelRoleConfig {
        &self.configs[role.index()]
    }

    pub fn config_mut(&mut self, role: ModelRole) -> &mut ModelRoleConfig {
        &mut self.configs[role.index()]
    }

    pub fn identity(&self, role: ModelRole) -> String {
        self.backends[role.index()].identity()
    }

    pub fn complete(&self, role: ModelRole, messages: &[ChatMessage]) -> Result<String, LmError> {
        {
            let mut g = self.in_flight.lock().expect("gateway lock");
            while g.0 >= self.cap {
                g = self.freed.wait(g).expect("gateway lock");
            }
            g.0 += 1;
            g.1 = g.1.max(g.0);
        }
        self.calls[role.index()].fetch_add(1, Ordering::Relaxed);
        let i = role.index();
        let out = self.backends[i].complete(messages, &self.configs[i]);
        self.in_flight.lock().expect("gateway lock").0 -= 1;
        self.freed.notify_one();
        out
    }

    pub fn calls(&self, role: ModelRole) -> u64 {
        self.calls[role.index()].load(Ordering::Relaxed)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.in_flight.lock().expect("gateway lock").1
    }

    /// A view of one role usable wherever a plain [`Backend`] is expected.
    pub fn handle(&self, role: ModelRole) -> RoleHandle<'_> {
        RoleHandle { gateway: self, role }
    }
}

pub struct RoleHandle<'a> {
    gateway: &'a Gateway,
    role: ModelRole,
}

impl Backend for RoleHandle<'_> {
    fn complete(&self, messages: &[ChatMessage], _cfg: &ModelRoleConfig) -> Result<String, LmError> {
        self.gateway.complete(self.role, messages)
    }

    fn identity(&self) -> String {
        self.gateway.identity(self.role)
    }
}
