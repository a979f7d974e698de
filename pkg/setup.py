from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="proxycausal",
    version="0.1.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Proxy-based causal discovery and doubly-robust dose-response estimation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/proxycausal",
    packages=find_packages(),
    include_package_data=True,
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "scikit-learn>=1.1",
        "pandas>=1.5",
        "matplotlib>=3.5",
        "rich>=12.0",
    ],
    entry_points={
        "console_scripts": [
            "proxycausal=proxycausal.main:main",
        ],
    },
)
