"""Fit a 3-24-24-1 MLP to the handcrafted pendulum expert.

Writes crates/core/fixtures/distilled_expert.json. Run from the repo root:

    python tools/distill_expert.py
"""

import json
import math
import pathlib

import numpy as np
import torch

SEED = 7
OUT = pathlib.Path("crates/core/fixtures/distilled_expert.json")


def expert(obs):
    c, s, w = obs[..., 0], obs[..., 1], obs[..., 2]
    balance = -6.0 * s - w
    energy = (0.5 * w * w + 10.0 * (c - 1.0) - 8.0) * (-w)
    swing = np.sign(energy)
    return np.clip(np.where(c > 0.6, balance, swing), -1.0, 1.0)


def step(theta, theta_dot, a):
    u = 2.0 * np.clip(a, -1.0, 1.0)
    theta_dot = np.clip(theta_dot + (15.0 * np.sin(theta) + 3.0 * u) * 0.05, -8.0, 8.0)
    return theta + theta_dot * 0.05, theta_dot


def observe(theta, theta_dot):
    return np.stack([np.cos(theta), np.sin(theta), theta_dot], axis=-1)


def rollout_states(rng, n):
    theta = rng.uniform(math.pi / 2, 3 * math.pi / 2, n)
    theta_dot = rng.uniform(-1.0, 1.0, n)
    out = []
    for _ in range(200):
        obs = observe(theta, theta_dot)
        out.append(obs)
        theta, theta_dot = step(theta, theta_dot, expert(obs))
    return np.concatenate(out)


def main():
    rng = np.random.default_rng(SEED)
    torch.manual_seed(SEED)
    on_policy = rollout_states(rng, 200)
    theta = rng.uniform(-math.pi, math.pi, 40000)
    theta_dot = rng.uniform(-8.0, 8.0, 40000)
    x = np.concatenate([on_policy, observe(theta, theta_dot)])
    y = expert(x)[:, None]

    x_t = torch.tensor(x, dtype=torch.float64)
    y_t = torch.tensor(y, dtype=torch.float64)
    net = torch.nn.Sequential(
        torch.nn.Linear(3, 24),
        torch.nn.ReLU(),
        torch.nn.Linear(24, 24),
        torch.nn.ReLU(),
        torch.nn.Linear(24, 1),
        torch.nn.Tanh(),
    ).double()
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=1500, gamma=0.3)
    for epoch in range(6000):
        idx = torch.randint(0, len(x_t), (4096,))
        loss = torch.mean((net(x_t[idx]) - y_t[idx]) ** 2)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        if epoch % 1000 == 0:
            print(epoch, loss.item())
    with torch.no_grad():
        print("final mse", float(torch.mean((net(x_t) - y_t) ** 2)))

    layers = []
    for lin, act in [(net[0], "relu"), (net[2], "relu"), (net[4], "tanh")]:
        layers.append(
            {
                "w": [[float(v) for v in row] for row in lin.weight.detach().numpy()],
                "b": [float(v) for v in lin.bias.detach().numpy()],
                "act": act,
            }
        )
    OUT.write_text(json.dumps({"layers": layers, "scale": 1.0}) + "\n")
    print("wrote", OUT)


if __name__ == "__main__":
    main()
