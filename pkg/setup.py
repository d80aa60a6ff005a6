try:
    from setuptools import setup, find_packages
except ImportError:
    from ez_setup import use_setuptools
    use_setuptools()
    from setuptools import setup, find_packages


__version__ = '0.3.0'

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name='chainsep',
    packages=find_packages(exclude=['test', 'test.*']),
    include_package_data=True,
    version=__version__,
    description="Multichannel blind source separation by chaining spatial mixture models and overdetermined IVA.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="GPLv3",
    keywords=['blind source separation', 'independent vector analysis', 'beamforming', 'mixture models',
              'array signal processing'],
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        'Intended Audience :: Science/Research',
        'Intended Audience :: Developers',
    ],
    python_requires='>=3.8',
    install_requires=[
        'numpy',
        'scipy',
        'matplotlib',
        'scikit-learn',
        'pandas',
        'prettytable',
        'joblib',
        'dask',
        'distributed',
        'soundfile',
        'threadpoolctl'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['chainsep=chainsep.cli:main']}
)
