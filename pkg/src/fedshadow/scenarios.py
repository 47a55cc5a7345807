"""Bundled scenario catalog.

Covers the three demo axes: which labels get flipped, when the attack
runs, and how aggressively malicious clients keep themselves available.
Each scenario carries a desk-scale config (60 rounds) and a paper-scale
one (200 rounds); attack windows given in paper rounds are auto-scaled
to desk rounds by the 0.3 factor.
"""

from dataclasses import dataclass

from fedshadow.federation import AttackConfig, FederationConfig

DESK_ROUNDS = 60
PAPER_ROUNDS = 200
_SCALE = DESK_ROUNDS / PAPER_ROUNDS

# victim/target pairs from the two benchmark datasets, mapped onto the
# 10-class synthetic dataset by id
LABEL_PAIRS = [
    ("label-dog-cat", 5, 3, "dog to cat (5 to 3)"),
    ("label-airplane-bird", 0, 2, "airplane to bird (0 to 2)"),
    ("label-auto-truck", 1, 9, "automobile to truck (1 to 9)"),
    ("label-deer-horse", 4, 7, "deer to horse (4 to 7)"),
    ("label-tshirt-shirt", 0, 6, "t-shirt to shirt (0 to 6)"),
    ("label-trouser-dress", 1, 3, "trouser to dress (1 to 3)"),
    ("label-coat-pullover", 4, 2, "coat to pullover (4 to 2)"),
    ("label-sneaker-boot", 7, 9, "sneaker to ankle boot (7 to 9)"),
]

# paper-scale attack windows (rounds out of 200)
TIMING_WINDOWS = {
    "timing-early": (1, 50),
    "timing-mid": (70, 200),
    "timing-late": (160, 200),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    config: FederationConfig        # desk scale
    paper_config: FederationConfig  # 200 rounds, windows verbatim


def scale_window(window, n_rounds=DESK_ROUNDS):
    start = max(1, round(window[0] * _SCALE))
    end = min(n_rounds, max(start, round(window[1] * _SCALE)))
    return (start, end)


def _pair(name, description, attack_paper, attack_desk):
    desk = FederationConfig(n_rounds=DESK_ROUNDS, attack=attack_desk)
    paper = FederationConfig(n_rounds=PAPER_ROUNDS, attack=attack_paper)
    return Scenario(name=name, description=description, config=desk, paper_config=paper)


def _catalog():
    scenarios = []

    scenarios.append(Scenario(
        name="clean-baseline",
        description="no attack; reference run for utility comparisons",
        config=FederationConfig(n_rounds=DESK_ROUNDS),
        paper_config=FederationConfig(n_rounds=PAPER_ROUNDS),
    ))

    for name, victim, target, text in LABEL_PAIRS:
        scenarios.append(_pair(
            name,
            f"label manipulation: {text}; 10 malicious, availability 0.7, full window",
            AttackConfig(victim, target, 10, (1, PAPER_ROUNDS), 0.7),
            AttackConfig(victim, target, 10, (1, DESK_ROUNDS), 0.7),
        ))

    for name, window in TIMING_WINDOWS.items():
        desk_window = scale_window(window)
        scenarios.append(_pair(
            name,
            f"attack timing: 1 to 9, paper window {list(window)} of {PAPER_ROUNDS}"
            f" (desk {list(desk_window)} of {DESK_ROUNDS})",
            AttackConfig(1, 9, 10, window, 0.7),
            AttackConfig(1, 9, 10, desk_window, 0.7),
        ))

    scenarios.append(_pair(
        "availability-0.7",
        "malicious availability: only 10% of clients malicious, but each "
        "selection slot is malicious with probability 0.7",
        AttackConfig(1, 9, 5, (1, PAPER_ROUNDS), 0.7),
        AttackConfig(1, 9, 5, (1, DESK_ROUNDS), 0.7),
    ))

    scenarios.append(_pair(
        "poison-30of50",
        "overwhelming poisoning: 30 of 50 clients malicious, uniform selection",
        AttackConfig(1, 9, 30, (1, PAPER_ROUNDS), None),
        AttackConfig(1, 9, 30, (1, DESK_ROUNDS), None),
    ))

    return {s.name: s for s in scenarios}


CATALOG = _catalog()


def get_scenario(name: str) -> Scenario:
    if name not in CATALOG:
        raise KeyError(f"unknown scenario {name!r}; see `fedshadow scenarios`")
    return CATALOG[name]
