"""Locomotion reconstruction from body-worn inertial sensors."""
