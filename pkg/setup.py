"""
Setup file for tailbandits package
Install with: pip install -e .
"""

from setuptools import setup, find_packages

setup(
    name="tailbandits",
    version="0.1.0",
    description="Regret Tail Lab - SE / UCB / UCB-L tails vs closed-form bounds",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["tailbench"],
    python_requires=">=3.12",
    install_requires=[
        "numpy>=1.26",
        "scipy>=1.11",
        "PyYAML>=6.0",
        "tqdm>=4.66",
    ],
    extras_require={
        "test": ["pytest>=7.4"],
    },
    entry_points={
        'console_scripts': [
            'tailbench=tailbench:main',
        ],
    },
)
