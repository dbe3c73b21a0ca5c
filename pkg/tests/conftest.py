import hypothesis

hypothesis.settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=100,
    deadline=None,
)
hypothesis.settings.load_profile("ci")
