"""Setup script for flexsim."""

from pathlib import Path

from setuptools import find_packages, setup

# Read long description from README
readme_file = Path(__file__).parent / "README.md"
long_description = readme_file.read_text() if readme_file.exists() else ""

setup(
    name="flexsim",
    version="0.4.0",
    author="flexsim developers",
    description="Bit-exact simulator, compiler and power model for a flexible tinyML accelerator SoC",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["flexsim*"]),
    include_package_data=True,
    python_requires=">=3.8",
    install_requires=[
        "click>=8.1.0",
        "rich>=13.0.0",
        "tqdm>=4.66.0",
        "numpy>=1.22",
        "scipy>=1.8",
        "tomli; python_version < '3.11'",
    ],
    entry_points={
        "console_scripts": [
            "flexsim=flexsim.main:main",
            "flexc=flexsim.main:flexc_main",
        ],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    keywords="accelerator simulator tinyml energy power-management cli",
)
