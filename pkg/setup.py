"""
Setup configuration for the duplex-green package.
"""

from setuptools import setup, find_packages


def read_requirements(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

requirements = read_requirements("requirements.txt")
development = [r for r in read_requirements("requirements_development.txt") if r not in requirements]

setup(
    name="duplex-green",
    version="1.0.0",
    author="Duplex Green Team",
    description="First-order dual-field Maxwell Green operators, identity checks and noise budgets",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["*.tests"]),
    py_modules=["main"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Physics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={
        "dev": development,
    },
    entry_points={
        "console_scripts": [
            "duplex-green=main:main",
        ],
    },
)
