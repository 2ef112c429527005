"""OAMP-Net: OAMP unfolded into layers with two trainable scalars each.

Layer ``l`` scales the linear update by ``lambda_l`` and enters the
error-variance prediction through ``gamma_l``::

    r_l   = u_l + lambda_l W_l (y - H u_l)
    tau_l = tr(C_l C_l^T) v_l / 2N + gamma_l^2 tr(W_l W_l^T) sigma^2 / 4N
    C_l   = I - gamma_l W_l H

With every ``lambda_l = gamma_l = 1`` the network is exactly classic OAMP.

The forward pass works in the singular basis of ``H = U diag(s) V^T``:
``W_l`` is then ``c V diag(d) U^T`` with ``d = v s / (v s^2 + sigma^2/2)``,
so after one SVD per model each layer costs two matrix products and all
traces are sums over ``s``. Gradients w.r.t. the 2L scalars are
central finite differences, evaluated as one stacked forward pass.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .link import qam_hard_demod
from .numerics import unstack_vec
from .oamp import DetectionModel, OampConfig
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OampNetParams:
    lambdas: np.ndarray
    gammas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).copy()
        gam = np.asarray(self.gammas, dtype=float).copy()
        if lam.ndim != 1 or lam.shape != gam.shape or lam.size == 0:
            raise ValueError("need equal-length, non-empty lambda and gamma lists")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(gam))):
            raise ValueError("OAMP-Net parameters must be finite")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "gammas", gam)

    @property
    def L(self) -> int:
        return self.lambdas.size

    @property
    def n_params(self) -> int:
        return 2 * self.L

    @classmethod
    def ones(cls, L: int = 10) -> "OampNetParams":
        return cls(np.ones(L), np.ones(L))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.lambdas, self.gammas])

    @classmethod
    def from_vector(cls, theta) -> "OampNetParams":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 2:
            raise ValueError("parameter vector must have even length")
        L = theta.size // 2
        return cls(theta[:L], theta[L:])


@dataclass(frozen=True)
class PreparedModels:
    """SVD form of a (batched) detection model."""

    z: np.ndarray          # U^T y
    s: np.ndarray          # singular values
    Vt: np.ndarray
    noise_var: np.ndarray
    s_sq_sum: np.ndarray   # tr(H^T H)

    @classmethod
    def from_model(cls, model: DetectionModel) -> "PreparedModels":
        U, s, Vt = np.linalg.svd(model.H_r)
        z = (np.swapaxes(U, -1, -2) @ model.y_r[..., None])[..., 0]
        return cls(z=z, s=s, Vt=Vt, noise_var=np.asarray(model.noise_var, dtype=float),
                   s_sq_sum=np.sum(s * s, axis=-1))

    @property
    def dim(self) -> int:
        return self.s.shape[-1]


def _prepared(model) -> PreparedModels:
    return model if isinstance(model, PreparedModels) else PreparedModels.from_model(model)


def _denoise(r, tau, alphabet) -> np.ndarray:
    """Posterior mean under a uniform prior on ``alphabet``, unrolled over levels."""
    logs = [-((r - ak) ** 2) / (2 * tau) for ak in alphabet]
    top = np.maximum.reduce(logs)
    num = np.zeros_like(r)
    den = np.zeros_like(r)
    for ak, lg in zip(alphabet, logs):
        w = np.exp(lg - top)
        num += ak * w
        den += w
    return num / den


def _unfold(prep: PreparedModels, lambdas, gammas, cfg: OampConfig) -> np.ndarray:
    """Forward pass for stacked parameter sets.

    ``lambdas``/``gammas`` have shape (P, L); the result has shape
    ``(P,) + batch + (2N,)``. Internally the parameter axis is last so that
    each layer is a batched matrix-matrix product.
    """
    lambdas = np.atleast_2d(lambdas)
    gammas = np.atleast_2d(gammas)
    P, L = lambdas.shape
    if L != cfg.iterations:
        raise ValueError(f"network has {L} layers but config asks for {cfg.iterations} iterations")
    n = prep.dim
    batch = prep.s.shape[:-1]
    s = prep.s[..., None]                  # batch + (n, 1)
    z = prep.z[..., None]
    s2 = prep.noise_var[..., None]         # batch + (1,)
    s_sq_sum = prep.s_sq_sum[..., None]
    Vt = prep.Vt
    V = np.swapaxes(Vt, -1, -2)

    u = np.zeros(batch + (n, P))
    v_s = np.full(batch + (P,), cfg.v_sq_init)
    for l in range(L):
        lam, gam = lambdas[:, l], gammas[:, l]
        res = z - s * (Vt @ u)
        v = np.maximum((np.sum(res * res, -2) - (n / 2) * s2) / s_sq_sum, cfg.epsilon)
        v_s = (1 - cfg.beta) * v_s + cfg.beta * v
        vs = v_s[..., None, :]
        d = vs * s / (vs * s * s + s2[..., None] / 2)
        c = n / np.sum(d * s, -2)
        r = u + (lam * c)[..., None, :] * (V @ (d * res))
        ds = c[..., None, :] * d * s
        tr_cc = np.sum((1 - gam * ds) ** 2, -2)
        tr_ww = c * c * np.sum(d * d, -2)
        tau = np.maximum(tr_cc / n * v_s + gam * gam * tr_ww / (2 * n) * s2, cfg.epsilon)
        u = _denoise(r, tau[..., None, :], cfg.alphabet)
    return np.moveaxis(u, -1, 0)


def net_forward(model, params: OampNetParams, cfg: OampConfig = OampConfig()) -> np.ndarray:
    """Network output ``u_(L+1)`` for a detection model (or batch of them)."""
    if params.L != cfg.iterations:
        raise ValueError(f"network has {params.L} layers but config asks for {cfg.iterations}")
    return _unfold(_prepared(model), params.lambdas[None], params.gammas[None], cfg)[0]


def _loss_stack(prep, thetas, u_true, cfg) -> np.ndarray:
    L = thetas.shape[1] // 2
    out = _unfold(prep, thetas[:, :L], thetas[:, L:], cfg)
    err = out - u_true
    loss = np.mean(np.sum(err * err, -1).reshape(thetas.shape[0], -1), axis=1)
    if not np.all(np.isfinite(loss)):
        raise FloatingPointError("non-finite OAMP-Net loss")
    return loss


def net_loss(params: OampNetParams, batch, u_true, cfg: OampConfig = OampConfig()) -> float:
    """Mean squared error ``||u_hat - u||^2`` over the batch."""
    prep = _prepared(batch)
    if prep.s.ndim < 2:
        raise ValueError("loss needs a batch axis")
    return float(_loss_stack(prep, params.to_vector()[None], u_true, cfg)[0])


def fd_gradient(f, theta, h: float = 1e-4) -> np.ndarray:
    """Central differences ``(f(t + h e_i) - f(t - h e_i)) / 2h`` of a scalar function."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def net_grad_fd(params: OampNetParams, batch, u_true, h: float = 1e-4,
                cfg: OampConfig = OampConfig(), return_loss: bool = False):
    """Finite-difference gradient of :func:`net_loss` over all 2L scalars.

    All ``4L`` perturbed networks (plus the unperturbed one) run in a
    single stacked forward pass.
    """
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    prep = _prepared(batch)
    theta = params.to_vector()
    k = theta.size
    E = h * np.eye(k)
    thetas = np.concatenate([theta[None], theta + E, theta - E])
    losses = _loss_stack(prep, thetas, u_true, cfg)
    grad = (losses[1:k + 1] - losses[k + 1:]) / (2 * h)
    return (grad, losses[0]) if return_loss else grad


@dataclass(frozen=True)
class NetTrainConfig:
    epochs: int = 500
    batch_size: int = 100
    dev_size: int = 1000
    lr: float = 1e-3
    fd_step: float = 1e-4
    snr_db: float = 20.0
    seed: int = 0
    eval_every: int = 1
    patience: int | None = None
    divergence_factor: float = 1e3


@dataclass
class NetTrainResult:
    params: OampNetParams
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_dev_ber: float = np.nan


def bit_errors(u_hat_r, bits, constellation) -> int:
    return int(np.count_nonzero(qam_hard_demod(unstack_vec(u_hat_r), constellation) != bits))


def train_oamp_net(params: OampNetParams, cfg: NetTrainConfig, make_batch,
                   oamp_cfg: OampConfig = OampConfig()) -> NetTrainResult:
    """Adam on finite-difference gradients with best-on-dev checkpointing.

    ``make_batch(seed, n, snr_db)`` must return ``(DetectionModel, u_true_r,
    bits)`` for ``n`` freshly simulated frames; it is where the channel and
    the frozen channel estimator live. Each epoch draws a new training
    batch. The development set is drawn once; the returned parameters are
    those with the lowest development BER seen (the starting point
    included), ties broken by development loss.
    """
    ss = np.random.SeedSequence(cfg.seed)
    dev_seed, train_seed = ss.spawn(2)
    dev_model, dev_u, dev_bits = make_batch(dev_seed, cfg.dev_size, cfg.snr_db)
    dev_prep = PreparedModels.from_model(dev_model)
    n_dev_bits = dev_bits.size

    def evaluate(p):
        out = _unfold(dev_prep, p.lambdas[None], p.gammas[None], oamp_cfg)[0]
        err = out - dev_u
        return float(np.mean(np.sum(err * err, -1))), bit_errors(out, dev_bits, oamp_cfg.constellation) / n_dev_bits

    best_loss, best_ber = evaluate(params)
    result = NetTrainResult(params=params, best_epoch=0, best_dev_ber=best_ber)
    result.history.append({"epoch": 0, "train_loss": np.nan, "dev_loss": best_loss, "dev_ber": best_ber})
    logger.info("oampnet start dev loss %.6g ber %.6g", best_loss, best_ber)

    state = AdamState.zeros_like(params.to_vector(), lr=cfg.lr)
    theta = params.to_vector()
    first_loss = None
    stale = 0
    for epoch, seed in enumerate(train_seed.spawn(cfg.epochs), start=1):
        model, u_true, _ = make_batch(seed, cfg.batch_size, cfg.snr_db)
        grad, loss = net_grad_fd(OampNetParams.from_vector(theta), model, u_true,
                                 cfg.fd_step, oamp_cfg, return_loss=True)
        if first_loss is None:
            # scale by the zero estimate's loss too, so a near-perfect first
            # batch does not make ordinary batches look divergent
            first_loss = max(loss, float(np.mean(np.sum(u_true * u_true, -1))))
        if not np.isfinite(loss) or loss > cfg.divergence_factor * first_loss:
            raise FloatingPointError(f"OAMP-Net training diverged at epoch {epoch}: loss {loss}")
        theta, state = adam_step(state, theta, grad)
        entry = {"epoch": epoch, "train_loss": float(loss), "dev_loss": np.nan, "dev_ber": np.nan}
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            p = OampNetParams.from_vector(theta)
            dl, db = evaluate(p)
            entry.update(dev_loss=dl, dev_ber=db)
            if db < best_ber or (db == best_ber and dl < best_loss):
                best_loss, best_ber = dl, db
                result.params, result.best_epoch, result.best_dev_ber = p, epoch, db
                stale = 0
            else:
                stale += 1
            logger.info("oampnet epoch %d train %.6g dev %.6g ber %.6g", epoch, loss, dl, db)
        result.history.append(entry)
        if cfg.patience is not None and stale >= cfg.patience:
            logger.info("oampnet early stop at epoch %d", epoch)
            break
    return result
