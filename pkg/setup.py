from setuptools import setup, find_packages
from os import path

here = path.abspath(path.dirname(__file__))

with open(path.join(here, "README.md")) as f:
    long_description = f.read()

with open(path.join(here, 'coreseg', '__init__.py')) as f:
    for line in f.readlines():
        line = line.strip()
        if line.startswith('__version__'):
            version = line.split('"')[1]

setup(
    name="coreseg",
    version=version,
    description=(
        "Open-set semantic segmentation of remote sensing images by "
        "conditional reconstruction"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    classifiers=[
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Image Recognition",
    ],
    keywords="open-set segmentation remote sensing autoencoder FiLM LOCO",
    packages=find_packages(exclude=["docs", "tests"]),
    package_data={"coreseg": ["py.typed"]},
    data_files=[("share/coreseg/configs", [
        "configs/toy.ini", "configs/vaihingen.ini", "configs/potsdam.ini",
        "configs/houston.ini"
    ])],
    install_requires=[
        'psutil',
        'torch>=2.0',
        'numpy>=1.22',
        'scipy',
        'matplotlib>=3.6',
        'Pillow',
        'tqdm',
    ],
    extras_require={
        'test': ['pytest'],
        'docs': ['sphinx', 'sphinx_rtd_theme'],
    },
    entry_points={
        'console_scripts': ['coreseg=coreseg.__main__:main'],
    },
    python_requires=">=3.8"
)
