import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name = "bvsim",
    version = "0.0.1",
    author = "Zeerak Waseem",
    author_email = "zeerak.w@gmail.com",
    description = "Simulation of impulsive control systems driven by inputs of bounded variation.",
    long_description = long_description,
    long_description_content_type = "text/markdown",
    packages = setuptools.find_packages(exclude = ['tests']),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: Unix"
    ],
    python_requires='>=3.8',
    install_requires=[
        "numpy>=1.20.1",
        "scipy>=1.6.0",
        "tqdm>=4.36.1",
        "joblib>=1.0.0",
        'wandb',
    ],
    extras_require={
        'test': ['sympy'],
    },
    entry_points={
        'console_scripts': ['bvsim=bvsim.cli:main'],
    },
    )
