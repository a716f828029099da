"""Resolution profiles and frame normalization constants."""

PROFILE_DIMS = {
    "paper": (224, 384),
    "desk": (56, 96),
}

FRAME_MEAN = (0.485, 0.456, 0.406)
FRAME_STD = (0.229, 0.224, 0.225)


def profile_dims(profile):
    try:
        return PROFILE_DIMS[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; expected one of {sorted(PROFILE_DIMS)}") from None
